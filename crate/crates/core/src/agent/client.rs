//! Chat-completion clients: an OpenAI-style HTTP client with bounded
//! exponential-backoff retries, and a scripted client that replays canned
//! replies in order.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const API_KEY_ENV: &str = "LLM_API_KEY";
pub const BASE_URL_ENV: &str = "LLM_BASE_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("scripted replies exhausted after {0} calls")]
    ScriptExhausted(usize),
    #[error("client configuration: {0}")]
    Config(String),
}

/// A chat model: takes the conversation so far, returns the reply text.
pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ClientError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatClientConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub temperature: f64,
    /// First backoff delay; attempt `k` waits `backoff * 2^k`.
    pub backoff: Duration,
}

impl Default for ChatClientConfig {
    fn default() -> Self {
        ChatClientConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            api_key_env: API_KEY_ENV.into(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            temperature: 0.0,
            backoff: Duration::from_millis(500),
        }
    }
}

impl ChatClientConfig {
    /// Default config with the base URL taken from `flag`, else from
    /// `LLM_BASE_URL`.
    pub fn from_env(flag: Option<&str>) -> Self {
        let mut cfg = ChatClientConfig::default();
        if let Some(url) = flag
            .map(str::to_string)
            .or_else(|| std::env::var(BASE_URL_ENV).ok())
        {
            cfg.base_url = url;
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if self.timeout.is_zero() {
            return Err(ClientError::Config("timeout must be positive".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(ClientError::Config("empty base URL".into()));
        }
        Ok(())
    }
}

/// POSTs `{base}/chat/completions` and returns `choices[0].message.content`.
pub struct HttpChatClient {
    config: ChatClientConfig,
    token: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(config: ChatClientConfig) -> Result<Self, ClientError> {
        config.validate()?;
        let token = std::env::var(&config.api_key_env).ok().filter(|t| !t.is_empty());
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpChatClient { config, token, http })
    }

    /// Override the bearer token instead of reading the environment.
    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut req = self.http.post(self.endpoint()).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                Attempt::Retry(e.to_string())
            } else {
                Attempt::Fatal(ClientError::BadResponse(e.to_string()))
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(ClientError::Status { status: status.as_u16(), body: text }));
        }
        extract_content(&text).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Retry(String),
    Fatal(ClientError),
}

/// Pull `choices[0].message.content` out of a completion response body.
pub fn extract_content(body: &str) -> Result<String, ClientError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| ClientError::BadResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ClientError::BadResponse("missing choices[0].message.content".into()))
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let body = self.request_body(messages);
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(content) => return Ok(content),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(ClientError::Transport {
            attempts: self.config.max_retries + 1,
            message: last,
        })
    }
}

/// Replays a fixed list of replies; every call consumes one.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    replies: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<Vec<ChatMessage>>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptLine {
    Text(String),
    Object { content: String },
}

impl ScriptedClient {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedClient {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    /// Parse a JSON-lines script. Each line is either a JSON string or an
    /// object with a `content` string.
    pub fn from_jsonl<R: Read>(input: R) -> Result<Self, ClientError> {
        let mut replies = Vec::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| ClientError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ScriptLine = serde_json::from_str(&line)
                .map_err(|e| ClientError::Config(format!("script line {}: {e}", i + 1)))?;
            replies.push(match parsed {
                ScriptLine::Text(t) | ScriptLine::Object { content: t } => t,
            });
        }
        Ok(ScriptedClient::new(replies))
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap().len()
    }

    /// Conversations received so far, one per call.
    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.seen.lock().unwrap().clone()
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(messages.to_vec());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(ClientError::ScriptExhausted(seen.len() - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_replays_in_order_then_exhausts() {
        let c = ScriptedClient::new(["one", "two"]);
        assert_eq!(c.complete(&[ChatMessage::user("a")]).unwrap(), "one");
        assert_eq!(c.complete(&[ChatMessage::user("b")]).unwrap(), "two");
        assert!(matches!(c.complete(&[]), Err(ClientError::ScriptExhausted(2))));
        assert_eq!(c.requests().len(), 3);
    }

    #[test]
    fn script_file_accepts_strings_and_objects() {
        let text = "\"plain\"\n\n{\"content\": \"wrapped\\nline\"}\n";
        let c = ScriptedClient::from_jsonl(text.as_bytes()).unwrap();
        assert_eq!(c.remaining(), 2);
        assert_eq!(c.complete(&[]).unwrap(), "plain");
        assert_eq!(c.complete(&[]).unwrap(), "wrapped\nline");
        assert!(ScriptedClient::from_jsonl("{bad".as_bytes()).is_err());
    }

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(extract_content(body).unwrap(), "hi");
        assert!(extract_content(r#"{"choices":[]}"#).is_err());
        assert!(extract_content("nope").is_err());
    }

    #[test]
    fn zero_timeout_rejected() {
        let cfg = ChatClientConfig { timeout: Duration::ZERO, ..Default::default() };
        assert!(HttpChatClient::new(cfg).is_err());
    }

    #[test]
    fn message_wire_shape() {
        let v = serde_json::to_value(ChatMessage::system("x")).unwrap();
        assert_eq!(v, json!({"role": "system", "content": "x"}));
    }
}
