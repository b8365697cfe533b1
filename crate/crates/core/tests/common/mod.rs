//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use minilang::Program;
use sha2::{Digest, Sha256};
use slicegen::focal::{FocalMethod, Project};
use slicegen::gateway::{ChatMessage, GatewayError, SamplingParams, Transport};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Parses `src` as file `f.mini` and returns it with the focal record of `name`.
pub fn focal_in(src: &str, name: &str) -> (Program, FocalMethod) {
    let project = Project::from_sources(Path::new("p"), [("f.mini".to_string(), src.to_string())])
        .unwrap_or_else(|e| panic!("{e}"));
    assert!(project.skipped.is_empty(), "{:?}\n{src}", project.skipped);
    let focal = project
        .focal_methods(0)
        .into_iter()
        .find(|f| f.function.name == name)
        .expect("function");
    (project.files[0].program.clone(), focal)
}

/// A fixture file of `proj-a` with its focal record for `name`.
pub fn proj_a_focal(file: &str, name: &str) -> (Program, FocalMethod) {
    let project = Project::load(&fixtures().join("proj-a")).unwrap();
    let focal = project
        .focal_methods(0)
        .into_iter()
        .find(|f| f.file == file && f.function.name == name)
        .expect("focal");
    (project.file(file).unwrap().program.clone(), focal)
}

/// A transport answering with `reply(call index)`, recording the sampling
/// parameters of every call.
pub struct FnTransport {
    reply: Box<dyn Fn(usize) -> Result<String, GatewayError> + Send + Sync>,
    pub calls: AtomicUsize,
    pub params: Mutex<Vec<SamplingParams>>,
}

impl FnTransport {
    pub fn new(reply: impl Fn(usize) -> Result<String, GatewayError> + Send + Sync + 'static) -> Arc<Self> {
        Arc::new(Self {
            reply: Box::new(reply),
            calls: AtomicUsize::new(0),
            params: Mutex::new(Vec::new()),
        })
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for FnTransport {
    fn send(&self, _: &str, _: &[ChatMessage], params: &SamplingParams) -> Result<String, GatewayError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        self.params.lock().unwrap().push(*params);
        (self.reply)(n)
    }
}

/// A `fixed_test` response wrapping `source`.
pub fn fixed_test_reply(source: &str) -> String {
    format!(
        "## Step 1: summarize the cause\n\nSee below.\n\n```json\n{}\n```\n",
        serde_json::json!({ "test_file": source })
    )
}

/// SHA-256 of every file under `root`, keyed by relative path.
pub fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            let bytes = std::fs::read(e.path()).unwrap();
            (rel, hex::encode(Sha256::digest(&bytes)))
        })
        .collect()
}
