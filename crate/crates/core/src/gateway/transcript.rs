//! Append-only JSONL transcript store keyed by request content.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatMessage, GatewayError, SamplingParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRequest {
    pub messages: Vec<ChatMessage>,
    pub params: SamplingParams,
}

/// One stored exchange. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub key: String,
    pub model: String,
    pub request: TranscriptRequest,
    pub response: String,
    pub ts: u64,
}

/// SHA-256 over the canonical JSON encoding of model, messages and params.
pub fn transcript_key(model: &str, messages: &[ChatMessage], params: &SamplingParams) -> String {
    let canonical = serde_json::json!({
        "messages": messages,
        "model": model,
        "params": params,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

#[derive(Debug)]
pub struct TranscriptStore {
    entries: Mutex<HashMap<String, Transcript>>,
    append_to: PathBuf,
    writer: Mutex<Option<File>>,
}

impl TranscriptStore {
    /// Opens a store. A directory loads every `*.jsonl` file in it (sorted by
    /// name) and appends to `transcripts.jsonl` inside it; a file path is
    /// loaded if it exists and appended to. The first entry for a key wins.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let io = |e: std::io::Error| GatewayError::Store(format!("{}: {e}", path.display()));
        let (files, append_to) = if path.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(io)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
            (files, path.join("transcripts.jsonl"))
        } else if path.exists() {
            (vec![path.to_path_buf()], path.to_path_buf())
        } else {
            (Vec::new(), path.to_path_buf())
        };
        let mut entries = HashMap::new();
        for file in files {
            let text = std::fs::read_to_string(&file).map_err(io)?;
            for (n, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let t: Transcript = serde_json::from_str(line)
                    .map_err(|e| GatewayError::Store(format!("{}:{}: {e}", file.display(), n + 1)))?;
                entries.entry(t.key.clone()).or_insert(t);
            }
        }
        Ok(Self {
            entries: Mutex::new(entries),
            append_to,
            writer: Mutex::new(None),
        })
    }

    /// Empty store that appends nowhere until written to.
    pub fn in_memory(entries: impl IntoIterator<Item = Transcript>) -> Self {
        Self {
            entries: Mutex::new(entries.into_iter().map(|t| (t.key.clone(), t)).collect()),
            append_to: PathBuf::new(),
            writer: Mutex::new(None),
        }
    }

    pub fn get(&self, key: &str) -> Option<Transcript> {
        self.entries.lock().expect("store lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a transcript in memory and appends it to the backing file.
    pub fn append(&self, t: Transcript) -> Result<(), GatewayError> {
        let line = serde_json::to_string(&t).map_err(|e| GatewayError::Store(e.to_string()))?;
        if !self.append_to.as_os_str().is_empty() {
            let mut writer = self.writer.lock().expect("writer lock");
            if writer.is_none() {
                if let Some(dir) = self.append_to.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| GatewayError::Store(e.to_string()))?;
                }
                let f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&self.append_to)
                    .map_err(|e| GatewayError::Store(format!("{}: {e}", self.append_to.display())))?;
                *writer = Some(f);
            }
            let f = writer.as_mut().expect("open writer");
            writeln!(f, "{line}").map_err(|e| GatewayError::Store(e.to_string()))?;
        }
        self.entries
            .lock()
            .expect("store lock")
            .entry(t.key.clone())
            .or_insert(t);
        Ok(())
    }
}
