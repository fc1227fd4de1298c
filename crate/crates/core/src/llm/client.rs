use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{
    LlmError, RequestKey, Transcript, TranscriptRecord, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL,
};

/// Anything that can answer a keyed prompt.
pub trait LlmClient: Send + Sync {
    fn complete(&self, key: &RequestKey, prompt: &str) -> Result<String, LlmError>;
}

/// Answers from a recorded transcript. Read-only, so safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    transcript: Transcript,
}

impl ReplayClient {
    pub fn new(transcript: Transcript) -> ReplayClient {
        ReplayClient { transcript }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, key: &RequestKey, prompt: &str) -> Result<String, LlmError> {
        let record = self
            .transcript
            .get(key)
            .ok_or_else(|| LlmError::ReplayMiss(key.clone()))?;
        if record.prompt != prompt {
            log::warn!("replayed prompt for {key} differs from the recorded one");
        }
        Ok(record.response.clone())
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Base URL of an OpenAI-style API, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub temperature: f64,
    /// Retries after the first attempt for transport errors, 429 and 5xx.
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl LiveConfig {
    pub fn new(base_url: &str, model: &str) -> LiveConfig {
        LiveConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key: None,
            temperature: 0.0,
            max_retries: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
            max_in_flight: 4,
        }
    }

    /// Reads `LVX_LLM_BASE_URL`, `LVX_LLM_MODEL` and (optionally)
    /// `LVX_LLM_API_KEY`.
    pub fn from_env() -> Result<LiveConfig, LlmError> {
        let base = std::env::var(ENV_BASE_URL).map_err(|_| LlmError::MissingEnv(ENV_BASE_URL))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| LlmError::MissingEnv(ENV_MODEL))?;
        let mut cfg = LiveConfig::new(&base, &model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }
}

/// Chat-completion client that records every exchange into a transcript.
pub struct LiveClient {
    cfg: LiveConfig,
    http: reqwest::blocking::Client,
    transcript: Mutex<Transcript>,
    slots: (Mutex<usize>, Condvar),
}

impl LiveClient {
    pub fn new(cfg: LiveConfig) -> Result<LiveClient, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| LlmError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(LiveClient {
            cfg,
            http,
            transcript: Mutex::new(Transcript::new()),
            slots: (Mutex::new(0), Condvar::new()),
        })
    }

    /// Snapshot of everything recorded so far.
    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }

    fn acquire(&self) {
        let (lock, cv) = &self.slots;
        let mut busy = lock.lock().unwrap();
        while *busy >= self.cfg.max_in_flight.max(1) {
            busy = cv.wait(busy).unwrap();
        }
        *busy += 1;
    }

    fn release(&self) {
        let (lock, cv) = &self.slots;
        *lock.lock().unwrap() -= 1;
        cv.notify_one();
    }

    fn request_once(&self, prompt: &str) -> Result<String, Attempt> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self
            .http
            .post(format!("{}/chat/completions", self.cfg.base_url))
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(LlmError::Http {
                status: status.as_u16(),
                body: text,
            }));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(LlmError::Protocol(e.to_string())))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                Attempt::Fatal(LlmError::Protocol(
                    "missing choices[0].message.content".into(),
                ))
            })
    }
}

enum Attempt {
    Retry(String),
    Fatal(LlmError),
}

impl LlmClient for LiveClient {
    fn complete(&self, key: &RequestKey, prompt: &str) -> Result<String, LlmError> {
        self.acquire();
        let mut attempts = 0;
        let result = loop {
            attempts += 1;
            match self.request_once(prompt) {
                Ok(text) => break Ok(text),
                Err(Attempt::Fatal(e)) => break Err(e),
                Err(Attempt::Retry(message)) => {
                    if attempts > self.cfg.max_retries {
                        break Err(LlmError::Transport { attempts, message });
                    }
                    log::warn!("LLM request {key} failed ({message}); retrying");
                    thread::sleep(self.cfg.backoff * 2u32.saturating_pow(attempts - 1));
                }
            }
        };
        self.release();
        let response = result?;
        self.transcript.lock().unwrap().push(TranscriptRecord {
            key: key.clone(),
            prompt: prompt.to_string(),
            response: response.clone(),
        })?;
        Ok(response)
    }
}
