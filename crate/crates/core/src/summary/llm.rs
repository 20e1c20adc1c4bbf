use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::Prompt;

pub const ENV_URL: &str = "KA_TRIAGE_LLM_URL";
pub const ENV_KEY: &str = "KA_TRIAGE_LLM_KEY";
pub const ENV_MODEL: &str = "KA_TRIAGE_LLM_MODEL";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error("generation unavailable: {reason}")]
    Unavailable { reason: String },
}

impl GenerationError {
    pub fn unavailable(reason: impl Into<String>) -> Self {
        GenerationError::Unavailable {
            reason: reason.into(),
        }
    }

    pub fn reason(&self) -> &str {
        match self {
            GenerationError::Unavailable { reason } => reason,
        }
    }
}

/// A text generator. Implementations may block; the gateway bounds them.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, prompt: &Prompt) -> Result<String, GenerationError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LlmOptions {
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub token_budget: usize,
}

impl Default for LlmOptions {
    fn default() -> Self {
        LlmOptions {
            timeout: Duration::from_secs(10),
            max_in_flight: 4,
            token_budget: 4000,
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Calls a model with a token budget, a wall-clock timeout, one retry and a
/// bound on concurrent requests.
pub struct LlmGateway {
    model: Arc<dyn LanguageModel>,
    options: LlmOptions,
    permits: Semaphore,
}

impl LlmGateway {
    pub fn new(model: Arc<dyn LanguageModel>, options: LlmOptions) -> Self {
        LlmGateway {
            model,
            permits: Semaphore::new(options.max_in_flight),
            options,
        }
    }

    pub fn options(&self) -> LlmOptions {
        self.options
    }

    pub fn generate(&self, prompt: &Prompt) -> Result<String, GenerationError> {
        if prompt.estimated_tokens() > self.options.token_budget {
            return Err(GenerationError::unavailable("budget"));
        }
        let _permit = self.permits.acquire();
        match self.attempt(prompt) {
            Ok(text) => Ok(text),
            Err(_) => self.attempt(prompt),
        }
    }

    fn attempt(&self, prompt: &Prompt) -> Result<String, GenerationError> {
        let (tx, rx) = mpsc::channel();
        let model = Arc::clone(&self.model);
        let prompt = prompt.clone();
        thread::spawn(move || {
            let _ = tx.send(model.complete(&prompt));
        });
        match rx.recv_timeout(self.options.timeout) {
            Ok(result) => result,
            Err(mpsc::RecvTimeoutError::Timeout) => Err(GenerationError::unavailable("timeout")),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(GenerationError::unavailable("model failed"))
            }
        }
    }
}

/// OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone)]
pub struct HttpLanguageModel {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl HttpLanguageModel {
    /// Reads the endpoint from the environment; `None` when no URL is set.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ENV_URL).ok().filter(|u| !u.is_empty())?;
        Some(HttpLanguageModel {
            url,
            api_key: std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty()),
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into()),
            timeout: LlmOptions::default().timeout,
        })
    }
}

impl LanguageModel for HttpLanguageModel {
    fn complete(&self, prompt: &Prompt) -> Result<String, GenerationError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| GenerationError::unavailable(e.to_string()))?;
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": prompt.system_context},
                {"role": "user", "content": prompt.user_message()},
            ],
        });
        let mut req = client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| GenerationError::unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(GenerationError::unavailable(format!("status {}", resp.status())));
        }
        let v: Value = resp
            .json()
            .map_err(|e| GenerationError::unavailable(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GenerationError::unavailable("malformed response"))
    }
}
