//! Blocking client for OpenAI-compatible `chat/completions` endpoints.
//!
//! One client is shared by every worker of a batch. It caps the number of
//! requests in flight, spaces request starts to a configured rate and retries
//! transport failures, 429 and 5xx responses with exponential backoff.

use std::fs::{File, OpenOptions};
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::append_jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token. Unset means no auth header.
    pub api_key_env: String,
    pub max_tokens: Option<u32>,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub concurrency: usize,
    pub requests_per_second: Option<f64>,
    /// Appends every request/response pair to this JSONL file.
    pub debug_log: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "http://localhost:8000/v1".into(),
            model: String::new(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_tokens: None,
            timeout_secs: 120,
            retries: 3,
            backoff_ms: 500,
            concurrency: 8,
            requests_per_second: None,
            debug_log: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid client configuration: {0}")]
    Config(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct LlmClient {
    config: LlmConfig,
    http: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: Gate,
    next_start: Mutex<Instant>,
    log: Option<Mutex<File>>,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient").field("endpoint", &self.config.endpoint).field("model", &self.config.model).finish()
    }
}

impl LlmClient {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        if config.concurrency == 0 {
            return Err(LlmError::Config("concurrency must be at least 1".into()));
        }
        if matches!(config.requests_per_second, Some(r) if r.is_nan() || r <= 0.0) {
            return Err(LlmError::Config("requests_per_second must be positive".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let log = match &config.debug_log {
            Some(path) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?,
            )),
            None => None,
        };
        Ok(LlmClient {
            gate: Gate { free: Mutex::new(config.concurrency), cv: Condvar::new() },
            next_start: Mutex::new(Instant::now()),
            config,
            http,
            api_key,
            log,
        })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn pace(&self) {
        let Some(rps) = self.config.requests_per_second else { return };
        let interval = Duration::from_secs_f64(1.0 / rps);
        let wait = {
            let mut next = self.next_start.lock().expect("rate lock");
            let now = Instant::now();
            let start = (*next).max(now);
            *next = start + interval;
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn attempt(&self, body: &Value) -> Result<String, LlmError> {
        let _permit = self.gate.acquire();
        self.pace();
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let mut req = self.http.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Status { status: status.as_u16(), body: text });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
    }

    /// Sends one user message and returns the first choice's content.
    pub fn complete(&self, prompt: &str, temperature: f64) -> Result<String, LlmError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        });
        if let Some(m) = self.config.max_tokens {
            body["max_tokens"] = json!(m);
        }
        let mut attempt = 0;
        loop {
            let result = self.attempt(&body);
            if let Some(log) = &self.log {
                let response = match &result {
                    Ok(text) => json!({"ok": text}),
                    Err(e) => json!({"error": e.to_string()}),
                };
                let mut file = log.lock().expect("log lock");
                if let Err(e) = append_jsonl(&mut file, &json!({"attempt": attempt, "request": body, "response": response})) {
                    log::warn!("debug log write failed: {e}");
                }
            }
            match result {
                Err(e) if e.is_retryable() && attempt < self.config.retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("request failed ({e}), retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}


#[cfg(test)]
mod tests {
    use super::testing::{reply, serve};
    use super::*;

    fn client(url: &str, retries: u32) -> LlmClient {
        LlmClient::new(LlmConfig {
            endpoint: url.into(),
            model: "m".into(),
            api_key_env: "PLANCRITIC_TEST_UNSET_KEY".into(),
            retries,
            backoff_ms: 1,
            ..LlmConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn parses_first_choice_and_sends_chat_body() {
        let server = serve(vec![reply("(pick-up a)")]);
        let out = client(&server.url, 0).complete("hello", 0.0).unwrap();
        assert_eq!(out, "(pick-up a)");
        let body: Value = serde_json::from_str(&server.requests.lock().unwrap()[0]).unwrap();
        assert_eq!(body["messages"][0]["content"], "hello");
        assert_eq!(body["model"], "m");
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let server = serve(vec![(500, "boom".into()), (429, "slow".into()), reply("ok")]);
        assert_eq!(client(&server.url, 3).complete("x", 0.0).unwrap(), "ok");
        assert_eq!(server.requests.lock().unwrap().len(), 3);
    }

    #[test]
    fn gives_up_after_retries_and_skips_client_errors() {
        let server = serve(vec![(503, "down".into())]);
        let err = client(&server.url, 3).complete("x", 0.0).unwrap_err();
        assert!(matches!(err, LlmError::Status { status: 503, .. }));
        assert_eq!(server.requests.lock().unwrap().len(), 4);

        let server = serve(vec![(400, "bad".into())]);
        assert!(client(&server.url, 3).complete("x", 0.0).is_err());
        assert_eq!(server.requests.lock().unwrap().len(), 1);
    }

    #[test]
    fn malformed_body() {
        let server = serve(vec![(200, "{\"choices\": []}".into())]);
        assert!(matches!(client(&server.url, 0).complete("x", 0.0), Err(LlmError::MalformedResponse(_))));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(LlmClient::new(LlmConfig { concurrency: 0, ..LlmConfig::default() }).is_err());
        assert!(LlmClient::new(LlmConfig { requests_per_second: Some(0.0), ..LlmConfig::default() }).is_err());
    }
}
