//! Chat-completion and embedding backends.
//!
//! [`MockBackend`] is a pure function of its inputs and never touches the
//! network; [`LiveBackend`] speaks the common `/v1/chat/completions` and
//! `/v1/embeddings` wire format.

mod archetypes;
mod live;
mod mock;

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use archetypes::{archetype, generic_alo, pair_alo};
pub use live::{LiveBackend, LiveConfig, ENV_API_KEY, ENV_BASE_URL};
pub use mock::{feature_hash, MockBackend};

/// Embedding dimension used unless configured otherwise.
pub const DEFAULT_DIMENSION: usize = 1536;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;
pub const MAX_TEMPERATURE: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("HTTP status {0}")]
    HttpError(u16),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited after retries")]
    RateLimited,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("input must be a non-empty list of non-empty texts")]
    EmptyInput,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("no API key: set {ENV_API_KEY}")]
    MissingApiKey,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: &str) -> Self {
        Self { role: Role::System, content: content.to_string() }
    }

    pub fn user(content: &str) -> Self {
        Self { role: Role::User, content: content.to_string() }
    }

    pub fn assistant(content: &str) -> Self {
        Self { role: Role::Assistant, content: content.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    /// Only the mock honours this.
    pub seed: u64,
    #[serde(rename = "maxTokens")]
    pub max_tokens: u32,
}

impl ChatRequest {
    /// An optional system message followed by one user message, at
    /// temperature 0.
    pub fn new(system: Option<&str>, user: &str) -> Self {
        let mut messages = Vec::new();
        if let Some(s) = system {
            messages.push(Message::system(s));
        }
        messages.push(Message::user(user));
        Self { messages, temperature: 0.0, seed: 0, max_tokens: DEFAULT_MAX_TOKENS }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=MAX_TEMPERATURE).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, {MAX_TEMPERATURE}]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("maxTokens must be positive".into()));
        }
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("no messages".into()));
        }
        if let Some(pos) = self.messages.iter().position(|m| m.role == Role::System) {
            if pos != 0 {
                return Err(GatewayError::InvalidRequest(
                    "the system message must come first".into(),
                ));
            }
        }
        Ok(())
    }

    /// Content of the last user message.
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Mock,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Live => "live",
            BackendKind::Mock => "mock",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub content: String,
    pub backend: BackendKind,
    pub latency: Duration,
    pub usage: Option<Usage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    /// Hex SHA-256 of the embedded text.
    #[serde(rename = "sourceTextHash")]
    pub source_text_hash: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, text: &str) -> Self {
        Self { values, source_text_hash: text_digest(text) }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn text_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A chat/embedding service. Implementations are shared across threads.
pub trait ChatBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError>;

    /// One vector per text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError>;
}

pub(crate) fn check_texts(texts: &[String]) -> Result<(), GatewayError> {
    if texts.is_empty() || texts.iter().any(|t| t.trim().is_empty()) {
        Err(GatewayError::EmptyInput)
    } else {
        Ok(())
    }
}

/// Runs `requests` with at most `in_flight` outstanding at once. Results
/// are in request order whatever order they finish in.
pub fn complete_all(
    backend: &dyn ChatBackend,
    requests: &[ChatRequest],
    in_flight: usize,
) -> Vec<Result<Completion, GatewayError>> {
    let width = in_flight.max(1);
    let mut results = Vec::with_capacity(requests.len());
    for chunk in requests.chunks(width) {
        let done: Vec<_> = thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|req| s.spawn(move || backend.complete(req)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(GatewayError::Transport("worker panicked".into()))))
                .collect()
        });
        results.extend(done);
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        assert!(ChatRequest::new(Some("s"), "u").validate().is_ok());
        assert!(ChatRequest::new(None, "u").with_temperature(2.0).validate().is_ok());
        assert!(ChatRequest::new(None, "u").with_temperature(2.1).validate().is_err());
        assert!(ChatRequest::new(None, "u").with_temperature(-0.1).validate().is_err());
        let mut req = ChatRequest::new(None, "u");
        req.messages.push(Message::system("late"));
        assert!(req.validate().is_err());
        let mut req = ChatRequest::new(None, "u");
        req.max_tokens = 0;
        assert!(req.validate().is_err());
    }

    #[test]
    fn complete_all_keeps_request_order() {
        let mock = MockBackend::default();
        let reqs: Vec<_> = (0..9)
            .map(|i| ChatRequest::new(None, &format!("Describe item {i}")).with_temperature(1.0).with_seed(i))
            .collect();
        let sequential: Vec<_> = reqs.iter().map(|r| mock.complete(r).unwrap().content).collect();
        for k in [1, 2, 4, 16] {
            let parallel: Vec<_> = complete_all(&mock, &reqs, k)
                .into_iter()
                .map(|r| r.unwrap().content)
                .collect();
            assert_eq!(parallel, sequential);
        }
    }

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(
            text_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
