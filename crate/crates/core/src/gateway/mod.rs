//! Chat-completion access: live HTTP, record (live plus persisted
//! transcripts) and replay (transcripts only), with the greedy-first top-p
//! escalation used when responses break the expected format.

mod http;
mod scripted;
mod transcript;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpTransport, DEFAULT_API_BASE};
pub use scripted::DirectoryTransport;
pub use transcript::{transcript_key, Transcript, TranscriptRequest, TranscriptStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
}

/// top_p of the greedy first attempt; below every escalation step.
pub const GREEDY_TOP_P: f64 = 0.1;

/// top_p values tried after the greedy attempt.
pub const ESCALATION_TOP_P: [f64; 3] = [0.2, 0.5, 0.8];

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 2048;

impl SamplingParams {
    pub fn greedy(max_output_tokens: u32) -> Self {
        Self::top_p(GREEDY_TOP_P, max_output_tokens)
    }

    pub fn top_p(top_p: f64, max_output_tokens: u32) -> Self {
        Self {
            temperature: 0.0,
            top_p,
            max_output_tokens,
        }
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature == 0.0 && self.top_p == GREEDY_TOP_P
    }
}

/// Parameters of every attempt, in order: greedy, then rising top_p.
pub fn escalation_schedule(max_output_tokens: u32) -> Vec<SamplingParams> {
    std::iter::once(SamplingParams::greedy(max_output_tokens))
        .chain(
            ESCALATION_TOP_P
                .iter()
                .map(|&p| SamplingParams::top_p(p, max_output_tokens)),
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    /// The provider's error payload, verbatim.
    #[error("provider error: {0}")]
    Provider(String),
    #[error("no recorded transcript for request key {}", &.0[..12.min(.0.len())])]
    ReplayMiss(String),
    #[error("response format still invalid after {} attempts: {last_error}", .attempts.len())]
    FormatExhausted { attempts: Vec<String>, last_error: String },
    #[error("transcript store: {0}")]
    Store(String),
}

/// Something that can answer one chat-completion request.
pub trait Transport: Send + Sync {
    fn send(&self, model: &str, messages: &[ChatMessage], params: &SamplingParams) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Live,
    Record,
    Replay,
}

impl std::str::FromStr for BackendMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Self::Live),
            "record" => Ok(Self::Record),
            "replay" => Ok(Self::Replay),
            _ => Err(format!("unknown backend `{s}` (expected live, record or replay)")),
        }
    }
}

/// Counting semaphore bounding in-flight live requests.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(cap: usize) -> Self {
        Self {
            free: Mutex::new(cap.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().expect("limiter lock");
            while *free == 0 {
                free = self.cv.wait(free).expect("limiter lock");
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().expect("limiter lock") += 1;
        self.cv.notify_one();
        out
    }
}

enum Backend {
    Live(Arc<dyn Transport>),
    Record(Arc<dyn Transport>, TranscriptStore),
    Replay(TranscriptStore),
}

/// A response that passed the format validator.
#[derive(Debug, Clone, PartialEq)]
pub struct Escalated<T> {
    pub value: T,
    pub raw: String,
    /// Attempts used, 1-based.
    pub attempts: usize,
    pub params: SamplingParams,
}

pub struct Gateway {
    model: String,
    max_output_tokens: u32,
    backend: Backend,
    limiter: Limiter,
}

/// Default cap on in-flight live requests.
pub const DEFAULT_MAX_IN_FLIGHT: usize = 2;

impl Gateway {
    pub fn live(model: &str, transport: Arc<dyn Transport>, max_in_flight: usize) -> Self {
        Self::with(model, Backend::Live(transport), max_in_flight)
    }

    pub fn record(model: &str, transport: Arc<dyn Transport>, store: TranscriptStore, max_in_flight: usize) -> Self {
        Self::with(model, Backend::Record(transport, store), max_in_flight)
    }

    /// Replay holds no transport, so it cannot reach the network.
    pub fn replay(model: &str, store: TranscriptStore) -> Self {
        Self::with(model, Backend::Replay(store), 1)
    }

    fn with(model: &str, backend: Backend, max_in_flight: usize) -> Self {
        Self {
            model: model.to_string(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            backend,
            limiter: Limiter::new(max_in_flight),
        }
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn max_output_tokens(&self) -> u32 {
        self.max_output_tokens
    }

    /// One completion. Record mode serves repeated requests from the store.
    pub fn complete(&self, messages: &[ChatMessage], params: &SamplingParams) -> Result<String, GatewayError> {
        let key = || transcript_key(&self.model, messages, params);
        match &self.backend {
            Backend::Live(t) => self.limiter.run(|| t.send(&self.model, messages, params)),
            Backend::Replay(store) => {
                let key = key();
                store.get(&key).map(|t| t.response).ok_or(GatewayError::ReplayMiss(key))
            }
            Backend::Record(t, store) => {
                let key = key();
                if let Some(hit) = store.get(&key) {
                    return Ok(hit.response);
                }
                let response = self.limiter.run(|| t.send(&self.model, messages, params))?;
                let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
                store.append(Transcript {
                    key,
                    model: self.model.clone(),
                    request: TranscriptRequest {
                        messages: messages.to_vec(),
                        params: *params,
                    },
                    response: response.clone(),
                    ts,
                })?;
                Ok(response)
            }
        }
    }

    /// Tries the escalation schedule until `validate` accepts a response.
    /// Transport and replay errors end the attempt sequence immediately.
    pub fn complete_with_escalation<T, E: std::fmt::Display>(
        &self,
        messages: &[ChatMessage],
        validate: impl Fn(&str) -> Result<T, E>,
    ) -> Result<Escalated<T>, GatewayError> {
        let mut attempts = Vec::new();
        let mut last_error = String::new();
        for params in escalation_schedule(self.max_output_tokens) {
            let raw = self.complete(messages, &params)?;
            match validate(&raw) {
                Ok(value) => {
                    return Ok(Escalated {
                        value,
                        raw,
                        attempts: attempts.len() + 1,
                        params,
                    })
                }
                Err(e) => {
                    tracing::debug!(attempt = attempts.len() + 1, error = %e, "response rejected");
                    last_error = e.to_string();
                    attempts.push(raw);
                }
            }
        }
        Err(GatewayError::FormatExhausted { attempts, last_error })
    }
}
