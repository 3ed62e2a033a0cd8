//! Blocking client for chat-completions-compatible endpoints. Transport
//! failures and 429/5xx responses are retried with exponential backoff;
//! authentication and context-window rejections are surfaced immediately,
//! never silently truncated.

use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

/// Connection and retry settings for one endpoint.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Bearer token; `None` sends no Authorization header.
    pub api_key: Option<String>,
    /// Generous output ceiling; truncated judge output surfaces as a parse
    /// event downstream rather than an error here.
    pub max_tokens: u32,
    /// Retries after the first attempt, for transport-class failures only.
    pub max_retries: u32,
    /// First retry delay; doubles per retry.
    pub backoff_base: Duration,
    pub request_timeout: Duration,
    /// In-flight request cap for batched judging.
    pub concurrency: usize,
}

impl GatewayConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            max_tokens: 4096,
            max_retries: 3,
            backoff_base: Duration::from_millis(250),
            request_timeout: Duration::from_secs(120),
            concurrency: 16,
        }
    }

    /// Reads the bearer token from `CAPS_API_KEY` when set.
    pub fn api_key_from_env(mut self) -> Self {
        self.api_key = std::env::var("CAPS_API_KEY").ok();
        self
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("authentication rejected (HTTP {status})")]
    AuthFailure { status: u16 },
    #[error("request exceeds the model's context window")]
    ContextOverflow,
    #[error("endpoint returned HTTP {status}: {detail}")]
    Api { status: u16, detail: String },
    #[error("malformed completion response: {0}")]
    Malformed(String),
    #[error("could not build HTTP client: {0}")]
    Build(String),
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(GatewayError),
}

/// One configured endpoint. Cloning shares the connection pool.
#[derive(Debug, Clone)]
pub struct GatewayClient {
    cfg: GatewayConfig,
    http: reqwest::blocking::Client,
}

impl GatewayClient {
    pub fn new(cfg: GatewayConfig) -> Result<Self, GatewayError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.request_timeout)
            .build()
            .map_err(|e| GatewayError::Build(e.to_string()))?;
        Ok(Self { cfg, http })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    /// Requests a single completion. Judge callers pass temperature 0 for
    /// reproducible verdicts.
    pub fn complete(&self, prompt: &str, temperature: f64) -> Result<String, GatewayError> {
        let body = serde_json::json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": self.cfg.max_tokens,
        });
        let mut attempts = 0u32;
        let mut delay = self.cfg.backoff_base;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(detail) => {
                    if attempts > self.cfg.max_retries {
                        return Err(GatewayError::Transport { attempts, detail });
                    }
                    std::thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
        }
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let mut req = self.http.post(&self.cfg.endpoint).json(body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(resp) => resp,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(text) => text,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Attempt::Fail(GatewayError::AuthFailure {
                status: status.as_u16(),
            });
        }
        if status.as_u16() == 400
            && (text.contains("context_length_exceeded") || text.contains("maximum context length"))
        {
            return Attempt::Fail(GatewayError::ContextOverflow);
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !status.is_success() {
            return Attempt::Fail(GatewayError::Api {
                status: status.as_u16(),
                detail: text,
            });
        }
        match serde_json::from_str::<ChatResponse>(&text) {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(choice) => Attempt::Done(choice.message.content),
                None => Attempt::Fail(GatewayError::Malformed("empty choices array".into())),
            },
            Err(e) => Attempt::Fail(GatewayError::Malformed(e.to_string())),
        }
    }
}
