//! HTTP backend for the `/v1/chat/completions` and `/v1/embeddings` wire
//! format.

use std::env;
use std::fmt;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{
    check_texts, BackendKind, ChatBackend, ChatRequest, Completion, EmbeddingVector, GatewayError,
    Usage,
};

pub const ENV_API_KEY: &str = "ALO_API_KEY";
pub const ENV_BASE_URL: &str = "ALO_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";
pub const DEFAULT_CHAT_MODEL: &str = "gpt-4";
pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-ada-002";

#[derive(Clone, PartialEq, Eq)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: String,
    pub chat_model: String,
    pub embedding_model: String,
    pub timeout: Duration,
    /// Total tries per request, the first included.
    pub attempts: u32,
    /// Delay before the second try; doubled for each further one.
    pub backoff: Duration,
}

// The key stays out of debug output.
impl fmt::Debug for LiveConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &"<redacted>")
            .field("chat_model", &self.chat_model)
            .field("embedding_model", &self.embedding_model)
            .field("timeout", &self.timeout)
            .field("attempts", &self.attempts)
            .field("backoff", &self.backoff)
            .finish()
    }
}

impl LiveConfig {
    pub fn new(base_url: &str, api_key: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            chat_model: DEFAULT_CHAT_MODEL.to_string(),
            embedding_model: DEFAULT_EMBEDDING_MODEL.to_string(),
            timeout: Duration::from_secs(120),
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    /// Reads the key and optional base URL from the environment.
    pub fn from_env() -> Result<Self, GatewayError> {
        let key = env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(GatewayError::MissingApiKey)?;
        let base = env::var(ENV_BASE_URL).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        Ok(Self::new(&base, &key))
    }
}

#[derive(Debug)]
pub struct LiveBackend {
    config: LiveConfig,
    agent: ureq::Agent,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    /// POSTs `body` to `path`, retrying on 429, 5xx, timeouts and transport
    /// failures. Every try sends the same bytes.
    fn post(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let url = format!("{}{path}", self.config.base_url);
        let payload = body.to_string();
        let mut delay = self.config.backoff;
        let mut last = GatewayError::Transport("no attempt made".into());
        for attempt in 0..self.config.attempts.max(1) {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            let sent = self
                .agent
                .post(&url)
                .header("Authorization", &format!("Bearer {}", self.config.api_key))
                .header("Content-Type", "application/json")
                .send(payload.as_str());
            let mut response = match sent {
                Ok(r) => r,
                Err(ureq::Error::Timeout(_)) => {
                    last = GatewayError::Timeout;
                    continue;
                }
                Err(e) => {
                    last = GatewayError::Transport(e.to_string());
                    continue;
                }
            };
            let status = response.status().as_u16();
            match status {
                200..=299 => {
                    let text = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
                    return serde_json::from_str(&text)
                        .map_err(|e| GatewayError::MalformedResponse(e.to_string()));
                }
                429 => last = GatewayError::RateLimited,
                500..=599 => last = GatewayError::HttpError(status),
                _ => return Err(GatewayError::HttpError(status)),
            }
        }
        Err(last)
    }
}

fn usage(v: &Value) -> Option<Usage> {
    let u = v.get("usage")?;
    let field = |k: &str| u.get(k).and_then(Value::as_u64).unwrap_or(0);
    Some(Usage {
        prompt_tokens: field("prompt_tokens"),
        completion_tokens: field("completion_tokens"),
        total_tokens: field("total_tokens"),
    })
}

impl ChatBackend for LiveBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        req.validate()?;
        let body = json!({
            "model": self.config.chat_model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let started = Instant::now();
        let v = self.post("/v1/chat/completions", &body)?;
        let content = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?;
        Ok(Completion {
            content: content.to_string(),
            backend: BackendKind::Live,
            latency: started.elapsed(),
            usage: usage(&v),
        })
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        check_texts(texts)?;
        let body = json!({ "model": self.config.embedding_model, "input": texts });
        let v = self.post("/v1/embeddings", &body)?;
        let data = v
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::MalformedResponse("missing data".into()))?;
        if data.len() != texts.len() {
            return Err(GatewayError::MalformedResponse(format!(
                "{} embeddings for {} inputs",
                data.len(),
                texts.len()
            )));
        }
        // Entries may carry an explicit index; order by it when present.
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let values: Option<Vec<f64>> = item
                .get("embedding")
                .and_then(Value::as_array)
                .and_then(|a| a.iter().map(Value::as_f64).collect());
            match (slots.get_mut(index), values) {
                (Some(slot @ None), Some(values)) if !values.is_empty() => *slot = Some(values),
                _ => return Err(GatewayError::MalformedResponse(format!("bad embedding entry {pos}"))),
            }
        }
        Ok(slots
            .into_iter()
            .zip(texts)
            .map(|(v, t)| EmbeddingVector::new(v.expect("every slot filled"), t))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    /// Serves canned `(status, body)` replies in order and records request
    /// bodies.
    fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        thread::spawn(move || {
            for (status, body) in replies {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; length];
                reader.read_exact(&mut buf).unwrap();
                log.lock().unwrap().push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        (format!("http://{addr}"), seen)
    }

    fn backend(base: &str) -> LiveBackend {
        let mut cfg = LiveConfig::new(base, "sk-test");
        cfg.backoff = Duration::from_millis(1);
        LiveBackend::new(cfg)
    }

    const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}],"usage":{"prompt_tokens":3,"completion_tokens":1,"total_tokens":4}}"#;

    #[test]
    fn completion_round_trip() {
        let (base, seen) = serve(vec![(200, OK.into())]);
        let c = backend(&base).complete(&ChatRequest::new(Some("sys"), "hi").with_temperature(0.7)).unwrap();
        assert_eq!(c.content, "hello");
        assert_eq!(c.backend, BackendKind::Live);
        assert_eq!(c.usage.unwrap().total_tokens, 4);
        let sent: Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
        assert_eq!(sent["model"], "gpt-4");
        assert_eq!(sent["messages"][0]["role"], "system");
        assert_eq!(sent["messages"][1]["content"], "hi");
        assert_eq!(sent["temperature"], 0.7);
    }

    #[test]
    fn unauthorized_fails_without_retry() {
        let (base, seen) = serve(vec![(401, "{}".into()), (200, OK.into())]);
        let err = backend(&base).complete(&ChatRequest::new(None, "hi")).unwrap_err();
        assert_eq!(err, GatewayError::HttpError(401));
        assert_eq!(seen.lock().unwrap().len(), 1);
    }

    #[test]
    fn retries_identical_bodies_then_succeeds() {
        let (base, seen) = serve(vec![(503, "{}".into()), (429, "{}".into()), (200, OK.into())]);
        let c = backend(&base).complete(&ChatRequest::new(None, "hi")).unwrap();
        assert_eq!(c.content, "hello");
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), 3);
        assert!(seen.iter().all(|b| *b == seen[0]));
    }

    #[test]
    fn rate_limited_after_three_attempts() {
        let (base, _) = serve(vec![(429, "{}".into()); 3]);
        assert_eq!(backend(&base).complete(&ChatRequest::new(None, "hi")), Err(GatewayError::RateLimited));
    }

    #[test]
    fn malformed_body() {
        let (base, _) = serve(vec![(200, r#"{"choices":[]}"#.into())]);
        assert!(matches!(
            backend(&base).complete(&ChatRequest::new(None, "hi")),
            Err(GatewayError::MalformedResponse(_))
        ));
    }

    #[test]
    fn embeddings_follow_indices() {
        let body = r#"{"data":[{"index":1,"embedding":[0.0,1.0]},{"index":0,"embedding":[1.0,0.0]}]}"#;
        let (base, seen) = serve(vec![(200, body.into())]);
        let v = backend(&base).embed(&["a".into(), "b".into()]).unwrap();
        assert_eq!(v[0].values, [1.0, 0.0]);
        assert_eq!(v[1].values, [0.0, 1.0]);
        let sent: Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
        assert_eq!(sent["model"], "text-embedding-ada-002");
        assert_eq!(sent["input"][1], "b");
    }

    #[test]
    fn debug_hides_key() {
        let cfg = LiveConfig::new("http://x", "sk-secret");
        assert!(!format!("{cfg:?}").contains("sk-secret"));
    }
}
