//! Run configuration: defaults, a flat `key = value` file, and overrides.

use std::path::{Path, PathBuf};

use minilang::{ExecutionLimits, COMPLEXITY_THRESHOLD};
use thiserror::Error;

use crate::gateway::{BackendMode, DEFAULT_MAX_IN_FLIGHT, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::repair::DEFAULT_MAX_FIX_ROUNDS;
use crate::slicing::DEFAULT_TARGET_DECISIONS;

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub project: PathBuf,
    pub threshold: u32,
    pub backend: BackendMode,
    pub model: String,
    /// Transcript file or directory; defaults to `<project>/transcripts.jsonl`.
    pub transcripts: Option<PathBuf>,
    pub max_fix_rounds: u32,
    pub tests_per_slice: u32,
    pub context_depth: u32,
    pub target_decisions: u32,
    pub limits: ExecutionLimits,
    pub out: PathBuf,
    pub stable_output: bool,
    pub workers: usize,
    pub max_in_flight: usize,
    pub max_output_tokens: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            project: PathBuf::from("."),
            threshold: COMPLEXITY_THRESHOLD,
            backend: BackendMode::Replay,
            model: DEFAULT_MODEL.to_string(),
            transcripts: None,
            max_fix_rounds: DEFAULT_MAX_FIX_ROUNDS,
            tests_per_slice: 1,
            context_depth: 1,
            target_decisions: DEFAULT_TARGET_DECISIONS,
            limits: ExecutionLimits::default(),
            out: PathBuf::from("out"),
            stable_output: false,
            workers: 1,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        message: e.to_string(),
    })
}

impl RunConfig {
    pub fn transcripts_path(&self) -> PathBuf {
        self.transcripts
            .clone()
            .unwrap_or_else(|| self.project.join("transcripts.jsonl"))
    }

    /// Sets one key. Relative paths are taken as given.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "project" => self.project = PathBuf::from(value),
            "threshold" => self.threshold = parse(key, value)?,
            "backend" => self.backend = parse(key, value)?,
            "model" => self.model = value.to_string(),
            "transcripts" => self.transcripts = Some(PathBuf::from(value)),
            "max_fix_rounds" => self.max_fix_rounds = parse(key, value)?,
            "tests_per_slice" => self.tests_per_slice = parse(key, value)?,
            "context_depth" => self.context_depth = parse(key, value)?,
            "target_decisions" => self.target_decisions = parse(key, value)?,
            "max_steps" => self.limits.max_steps = parse(key, value)?,
            "max_call_depth" => self.limits.max_call_depth = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "stable_output" => self.stable_output = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "max_in_flight" => self.max_in_flight = parse(key, value)?,
            "max_output_tokens" => self.max_output_tokens = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        let positive = |n: u64, key: &str| {
            if n == 0 {
                Err(ConfigError::BadValue {
                    key: key.to_string(),
                    message: "must be at least 1".into(),
                })
            } else {
                Ok(())
            }
        };
        match key {
            "max_fix_rounds" => positive(self.max_fix_rounds.into(), key),
            "tests_per_slice" => positive(self.tests_per_slice.into(), key),
            "target_decisions" => positive(self.target_decisions.into(), key),
            "workers" => positive(self.workers as u64, key),
            "max_in_flight" => positive(self.max_in_flight as u64, key),
            _ => Ok(()),
        }
    }

    /// Applies a config file: one `key = value` per line, `#` comments and
    /// blank lines ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.apply_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(
            (c.threshold, c.max_fix_rounds, c.tests_per_slice, c.context_depth),
            (10, 10, 1, 1)
        );
        assert_eq!(c.transcripts_path(), PathBuf::from("./transcripts.jsonl"));
    }

    #[test]
    fn file_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# run\nproject = fixtures/proj-a\nbackend=record  # recording\n\nmax_steps = 500\n")
            .unwrap();
        assert_eq!(c.project, PathBuf::from("fixtures/proj-a"));
        assert_eq!(c.backend, BackendMode::Record);
        assert_eq!(c.limits.max_steps, 500);
        assert_eq!(c.apply_text("threshold"), Err(ConfigError::Syntax { line: 1 }));
        assert_eq!(
            c.apply_text("colour = red"),
            Err(ConfigError::UnknownKey("colour".into()))
        );
        assert!(matches!(
            c.apply_text("max_fix_rounds = 0"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            c.apply_text("backend = cloud"),
            Err(ConfigError::BadValue { .. })
        ));
    }
}
