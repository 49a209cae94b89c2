//! Chat-completion HTTP backend.
//!
//! Posts `{model, messages, temperature}` to `<endpoint>/chat/completions`
//! and reads `choices[0].message.content`. Requests are spaced by the
//! configured minimum interval; transport errors, 429 and 5xx responses are
//! retried with exponential backoff.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{Backend, EvaluatorConfig, Query};
use crate::error::{Error, Result};
use crate::hashing::FieldHasher;

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

pub struct RemoteBackend {
    id: String,
    url: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    max_retries: u32,
    min_interval: Duration,
    backoff: Duration,
    last_request: Mutex<Option<Instant>>,
    agent: ureq::Agent,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

impl RemoteBackend {
    pub fn new(config: &EvaluatorConfig) -> Result<Self> {
        let model = config
            .model
            .clone()
            .ok_or_else(|| Error::invalid(format!("remote evaluator `{}` has no model", config.id)))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!(
                "evaluator `{}`: ${} is not set, sending unauthenticated requests",
                config.id,
                config.api_key_env
            );
        }
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build();
        Ok(Self {
            id: config.id.clone(),
            url: format!("{}/chat/completions", config.endpoint.trim_end_matches('/')),
            model,
            temperature: config.temperature,
            api_key,
            max_retries: config.max_retries,
            min_interval: Duration::from_millis(config.min_interval_ms),
            backoff: Duration::from_millis(200),
            last_request: Mutex::new(None),
            agent: ureq::Agent::new_with_config(agent_config),
        })
    }

    /// Overrides the base retry delay (doubled after each failed attempt).
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(t) = *last {
            let since = t.elapsed();
            if since < self.min_interval {
                thread::sleep(self.min_interval - since);
            }
        }
        *last = Some(Instant::now());
    }

    fn attempt(&self, prompt: &str) -> Attempt {
        self.pace();
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        log::debug!("{} request: {}", self.id, body);
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        log::debug!("{} response {status}: {text}", self.id);
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if status >= 400 {
            return Attempt::Fatal(format!("HTTP {status}: {}", truncate(&text, 200)));
        }
        match serde_json::from_str::<Completion>(&text) {
            Ok(c) => match c.choices.into_iter().next() {
                Some(choice) => Attempt::Done(choice.message.content.unwrap_or_default()),
                None => Attempt::Fatal("response has no choices".into()),
            },
            Err(e) => Attempt::Fatal(format!("malformed completion: {e}")),
        }
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl Backend for RemoteBackend {
    fn fingerprint(&self) -> String {
        let mut h = FieldHasher::new("remote-backend-v1");
        h.field(&self.url).field(&self.model);
        h.short()
    }

    fn respond(&self, query: &Query<'_>) -> Result<String> {
        let mut last = String::new();
        for i in 0..=self.max_retries {
            if i > 0 {
                thread::sleep(self.backoff * 2u32.saturating_pow(i - 1));
            }
            match self.attempt(query.prompt) {
                Attempt::Done(s) => return Ok(s),
                Attempt::Retry(m) => {
                    log::warn!("{}: attempt {} failed: {m}", self.id, i + 1);
                    last = m;
                }
                Attempt::Fatal(m) => {
                    last = m;
                    break;
                }
            }
        }
        Err(Error::Transport {
            evaluator: self.id.clone(),
            message: last,
        })
    }

    fn is_remote(&self) -> bool {
        true
    }
}
