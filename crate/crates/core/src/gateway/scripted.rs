//! A transport that answers from a directory of canned responses. It backs
//! offline prompt work and the recording of fixture transcripts.
//!
//! Requests are routed by the title line of the task message:
//!
//! - decompose `Q` reads `<dir(Q)>/decompose.md`
//! - tests for slice `i` of `Q` read `<dir(Q)>/generate-<i>.md`
//! - fixing `Q/slice-<i>/<test>` reads `<dir(Q)>/fix-slice-<i>-<test>.md`
//!
//! The k-th request (k > 1) for the same stem reads `<stem>-<k>.md`, and
//! escalation attempt a > 1 reads `<name>.<a>.md` when it exists.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{ChatMessage, GatewayError, Role, SamplingParams, Transport, ESCALATION_TOP_P};
use crate::focal::focal_dir_name;

pub struct DirectoryTransport {
    root: PathBuf,
    seen: Mutex<HashMap<String, usize>>,
}

fn quoted(title: &str) -> Option<&str> {
    let start = title.find('`')? + 1;
    let len = title[start..].find('`')?;
    Some(&title[start..start + len])
}

/// Response stem for a task title, relative to the root.
fn stem(title: &str) -> Option<String> {
    let rest = title.strip_prefix("# Task: ")?;
    let name = quoted(rest)?;
    if rest.starts_with("decompose ") {
        return Some(format!("{}/decompose", focal_dir_name(name)));
    }
    if let Some(slice) = rest.strip_prefix("tests for slice ") {
        let i = slice.split_whitespace().next()?;
        return Some(format!("{}/generate-{i}", focal_dir_name(name)));
    }
    if rest.starts_with("fix the failing test ") {
        let (focal, tail) = name.rsplit_once("/slice-")?;
        let (i, test) = tail.split_once('/')?;
        return Some(format!(
            "{}/fix-slice-{i}-{}",
            focal_dir_name(focal),
            test.replace('#', "-")
        ));
    }
    None
}

/// 1 for the greedy attempt, then 2.. along the escalation schedule.
fn attempt(params: &SamplingParams) -> usize {
    if params.is_greedy() {
        return 1;
    }
    ESCALATION_TOP_P
        .iter()
        .position(|&p| p == params.top_p)
        .map_or(1, |i| i + 2)
}

impl DirectoryTransport {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            seen: Mutex::new(HashMap::new()),
        }
    }
}

impl Transport for DirectoryTransport {
    fn send(&self, _model: &str, messages: &[ChatMessage], params: &SamplingParams) -> Result<String, GatewayError> {
        let task = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| GatewayError::Transport("request has no user message".into()))?;
        let title = task.content.lines().next().unwrap_or("");
        let stem = stem(title).ok_or_else(|| GatewayError::Transport(format!("unrecognized task `{title}`")))?;
        let a = attempt(params);
        let k = {
            let mut seen = self.seen.lock().expect("counter lock");
            let k = seen.entry(stem.clone()).or_insert(0);
            if a == 1 {
                *k += 1;
            }
            (*k).max(1)
        };
        let name = if k > 1 { format!("{stem}-{k}") } else { stem };
        let tried = self.root.join(format!("{name}.{a}.md"));
        let path = if a > 1 && tried.exists() {
            tried
        } else {
            self.root.join(format!("{name}.md"))
        };
        std::fs::read_to_string(&path)
            .map_err(|e| GatewayError::Transport(format!("no scripted response {}: {e}", path.display())))
    }
}
