//! Evaluator abstraction over chat-completion endpoints and an offline mock.
//!
//! An [`Evaluator`] renders prompts, consults the response cache, calls its
//! [`Backend`] on a miss, parses the reply and logs a [`TrialRecord`] for
//! every query.

pub mod cache;
pub mod mock;
pub mod prompt;
pub mod remote;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulation::{ModulatedItem, Substitution};
use crate::strategy::Strategy;

pub use cache::ResponseCache;
pub use mock::{CommonGround, MockBackend, TriggerLexicon};
pub use prompt::{PromptPaths, PromptTemplates};
pub use remote::RemoteBackend;

/// Consecutive transport failures after which an evaluator stops issuing
/// requests for the rest of the run.
pub const CIRCUIT_BREAKER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Detection,
    Reconstruction,
    Importance,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Detection => "detection",
            Task::Reconstruction => "reconstruction",
            Task::Importance => "importance",
        })
    }
}

/// Identifies a base item (`strategy: None`, level 0) or one of its variants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemKey {
    pub base_id: String,
    pub strategy: Option<Strategy>,
    pub level: u8,
}

impl ItemKey {
    pub fn base(id: &str) -> Self {
        Self {
            base_id: id.to_string(),
            strategy: None,
            level: 0,
        }
    }

    pub fn modulated(id: &str, strategy: Strategy, level: u8) -> Self {
        Self {
            base_id: id.to_string(),
            strategy: Some(strategy),
            level,
        }
    }
}

impl fmt::Display for ItemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.strategy {
            Some(s) => write!(f, "{}/{}/{}", self.base_id, s, self.level),
            None => write!(f, "{}/base", self.base_id),
        }
    }
}

/// Parsed outcome of one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parsed {
    /// `None` is an abstain.
    Verdict(Option<bool>),
    Words(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub key: ItemKey,
    pub task: Task,
    pub evaluator_id: String,
    pub trial_index: u8,
    /// Number of parse retries that were needed.
    pub attempt: u8,
    pub raw_response: String,
    pub parsed: Parsed,
    pub timestamp_ms: u64,
    pub cache_hit: bool,
}

/// Everything a backend may look at. Remote backends only use `prompt`;
/// the mock reads the structured fields.
#[derive(Debug)]
pub struct Query<'a> {
    pub task: Task,
    pub prompt: &'a str,
    pub key: &'a ItemKey,
    pub text: &'a str,
    pub substitutions: &'a [Substitution],
    /// Number of words requested (importance) or expected (reconstruction).
    pub count: usize,
    pub trial_index: u8,
}

pub trait Backend: Send + Sync {
    /// Changes whenever the backend would answer differently.
    fn fingerprint(&self) -> String;
    fn respond(&self, query: &Query<'_>) -> Result<String>;
    fn is_remote(&self) -> bool;
}

fn default_trials() -> u8 {
    3
}
fn default_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}
fn default_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}
fn default_timeout() -> u64 {
    60
}

pub const MOCK_ENDPOINT: &str = "mock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorConfig {
    pub id: String,
    /// Base URL of a chat-completion API, or `"mock"`.
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_trials")]
    pub trials_per_query: u8,
    #[serde(default)]
    pub prompts: PromptPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub common_ground: Option<CommonGround>,
    /// Mock only: trigger lexicon path, overriding the run-level default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triggers: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub min_interval_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl EvaluatorConfig {
    pub fn mock(id: &str, common_ground: CommonGround) -> Self {
        Self {
            id: id.to_string(),
            endpoint: MOCK_ENDPOINT.to_string(),
            model: None,
            api_key_env: default_key_env(),
            temperature: 0.0,
            trials_per_query: default_trials(),
            prompts: PromptPaths::default(),
            common_ground: Some(common_ground),
            triggers: None,
            max_in_flight: default_in_flight(),
            min_interval_ms: 0,
            max_retries: default_retries(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == MOCK_ENDPOINT
    }

    /// Checks the constraints that experiment runs rely on.
    pub fn validate(&self, experiment: bool) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::invalid("evaluator id is empty"));
        }
        if experiment && self.temperature != 0.0 {
            return Err(Error::invalid(format!(
                "evaluator `{}`: temperature must be 0 in experiment runs",
                self.id
            )));
        }
        if self.trials_per_query % 2 != 1 {
            return Err(Error::invalid(format!(
                "evaluator `{}`: trials_per_query must be odd",
                self.id
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::invalid(format!(
                "evaluator `{}`: max_in_flight must be positive",
                self.id
            )));
        }
        if self.is_mock() && self.common_ground.is_none() {
            return Err(Error::invalid(format!(
                "mock evaluator `{}` needs a common_ground table",
                self.id
            )));
        }
        Ok(())
    }
}

/// Response parsing: the first word must be `yes` or `no`.
pub fn parse_verdict(raw: &str) -> Option<bool> {
    let first = raw
        .split_whitespace()
        .next()?
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    match first.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

fn strip_list_marker(s: &str) -> &str {
    let s = s.trim();
    let s = s.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest.strip_prefix(['.', ')', ':']) {
            return r.trim();
        }
    }
    s
}

fn clean_word(s: &str) -> String {
    s.trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '`')
        .trim()
        .to_string()
}

/// Importance replies: surface tokens separated by commas, semicolons or
/// newlines, optionally numbered.
pub fn parse_word_list(raw: &str) -> Vec<String> {
    raw.split([',', ';', '\n'])
        .map(strip_list_marker)
        .map(clean_word)
        .filter(|w| !w.is_empty())
        .collect()
}

/// Reconstruction replies aligned to `count` slots. Numbered lines
/// (`N. word`) land in slot N; unnumbered lines fill slots in order.
/// Missing answers are empty strings.
pub fn parse_reconstruction(raw: &str, count: usize) -> Vec<String> {
    let mut out = vec![String::new(); count];
    let lines: Vec<&str> = if raw.lines().filter(|l| !l.trim().is_empty()).count() <= 1
        && raw.contains(',')
    {
        raw.split(',').collect()
    } else {
        raw.lines().collect()
    };
    let mut next = 0;
    for line in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
        let (slot, body) = match t[digits..].strip_prefix(['.', ')', ':']) {
            Some(rest) if digits > 0 => (t[..digits].parse::<usize>().ok().and_then(|n| n.checked_sub(1)), rest),
            _ => (None, t),
        };
        let slot = slot.unwrap_or(next);
        // `original -> answer` and `original: answer` forms keep the answer.
        let body = body
            .rsplit_once("->")
            .map(|(_, r)| r)
            .or_else(|| body.rsplit_once(':').map(|(_, r)| r))
            .unwrap_or(body);
        if slot < count {
            out[slot] = clean_word(body);
        }
        next = slot + 1;
    }
    out
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub struct Evaluator {
    config: EvaluatorConfig,
    templates: PromptTemplates,
    backend: Box<dyn Backend>,
    cache: Arc<ResponseCache>,
    cache_only: bool,
    trials: Mutex<Vec<TrialRecord>>,
    backend_calls: AtomicUsize,
    consecutive_failures: AtomicUsize,
}

impl fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Evaluator")
            .field("id", &self.config.id)
            .field("fingerprint", &self.backend.fingerprint())
            .finish()
    }
}

impl Evaluator {
    pub fn new(config: EvaluatorConfig, templates: PromptTemplates, backend: Box<dyn Backend>) -> Self {
        Self {
            config,
            templates,
            backend,
            cache: Arc::new(ResponseCache::in_memory()),
            cache_only: false,
            trials: Mutex::new(Vec::new()),
            backend_calls: AtomicUsize::new(0),
            consecutive_failures: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = cache;
        self
    }

    /// Replay mode: a cache miss is an error instead of a backend call.
    pub fn cache_only(mut self, on: bool) -> Self {
        self.cache_only = on;
        self
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    pub fn config(&self) -> &EvaluatorConfig {
        &self.config
    }

    pub fn templates(&self) -> &PromptTemplates {
        &self.templates
    }

    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::Relaxed)
    }

    /// Drains the trial log, sorted by (key, task, trial index).
    pub fn take_trials(&self) -> Vec<TrialRecord> {
        let mut t = std::mem::take(&mut *self.trials.lock().unwrap());
        t.sort_by(|a, b| {
            (&a.key, a.task, a.trial_index).cmp(&(&b.key, b.task, b.trial_index))
        });
        t
    }

    fn query_raw(&self, q: &Query<'_>, attempt: u8) -> Result<(String, bool)> {
        let key = cache::cache_key(
            &self.config.id,
            &self.backend.fingerprint(),
            q.prompt,
            self.config.temperature,
            q.trial_index,
            attempt,
        );
        if let Some(hit) = self.cache.get(&key) {
            return Ok((hit, true));
        }
        if self.cache_only {
            return Err(Error::CacheMiss(self.config.id.clone()));
        }
        if self.consecutive_failures.load(Ordering::Relaxed) >= CIRCUIT_BREAKER {
            return Err(Error::Transport {
                evaluator: self.config.id.clone(),
                message: "circuit open after repeated failures".into(),
            });
        }
        self.backend_calls.fetch_add(1, Ordering::Relaxed);
        match self.backend.respond(q) {
            Ok(raw) => {
                self.consecutive_failures.store(0, Ordering::Relaxed);
                self.cache.put(&key, &raw)?;
                Ok((raw, false))
            }
            Err(e) => {
                self.consecutive_failures.fetch_add(1, Ordering::Relaxed);
                Err(e)
            }
        }
    }

    fn log(&self, q: &Query<'_>, attempt: u8, raw: String, parsed: Parsed, cache_hit: bool) {
        self.trials.lock().unwrap().push(TrialRecord {
            key: q.key.clone(),
            task: q.task,
            evaluator_id: self.config.id.clone(),
            trial_index: q.trial_index,
            attempt,
            raw_response: raw,
            parsed,
            timestamp_ms: now_ms(),
            cache_hit,
        });
    }

    /// One detection trial. Unparseable replies are retried once, then
    /// recorded as an abstain (`None`).
    pub fn detect(
        &self,
        key: &ItemKey,
        text: &str,
        substitutions: &[Substitution],
        trial_index: u8,
    ) -> Result<Option<bool>> {
        let prompt = prompt::render(&self.templates.detection, &[("text", text)]);
        let q = Query {
            task: Task::Detection,
            prompt: &prompt,
            key,
            text,
            substitutions,
            count: 0,
            trial_index,
        };
        let mut last = (String::new(), false);
        for attempt in 0..2u8 {
            let (raw, hit) = self.query_raw(&q, attempt)?;
            if let Some(v) = parse_verdict(&raw) {
                self.log(&q, attempt, raw, Parsed::Verdict(Some(v)), hit);
                return Ok(Some(v));
            }
            last = (raw, hit);
        }
        self.log(&q, 1, last.0, Parsed::Verdict(None), last.1);
        Ok(None)
    }

    /// Runs `trials_per_query` detection trials and returns the majority;
    /// abstains count as not violating.
    pub fn majority_detect(
        &self,
        key: &ItemKey,
        text: &str,
        substitutions: &[Substitution],
    ) -> Result<bool> {
        let n = self.config.trials_per_query;
        let verdicts = (0..n)
            .map(|t| self.detect(key, text, substitutions, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(majority(&verdicts))
    }

    pub fn importance(&self, key: &ItemKey, text: &str, count: usize, trial_index: u8) -> Result<Vec<String>> {
        let count_s = count.to_string();
        let prompt = prompt::render(&self.templates.importance, &[("text", text), ("count", &count_s)]);
        let q = Query {
            task: Task::Importance,
            prompt: &prompt,
            key,
            text,
            substitutions: &[],
            count,
            trial_index,
        };
        let (raw, hit) = self.query_raw(&q, 0)?;
        let words = parse_word_list(&raw);
        self.log(&q, 0, raw, Parsed::Words(words.clone()), hit);
        Ok(words)
    }

    /// Asks for the original word behind each substitution. The result is
    /// aligned with `modulated.substitutions`.
    pub fn reconstruct(&self, modulated: &ModulatedItem, trial_index: u8) -> Result<Vec<String>> {
        if modulated.substitutions.is_empty() {
            return Err(Error::invalid(format!(
                "{} has no substitutions to reconstruct",
                modulated.key()
            )));
        }
        let list: Vec<String> = modulated
            .substitutions
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}", i + 1, s.replacement))
            .collect();
        let list = list.join("\n");
        let count = modulated.substitutions.len().to_string();
        let prompt = prompt::render(
            &self.templates.reconstruction,
            &[("text", &modulated.text), ("count", &count), ("replacements", &list)],
        );
        let key = modulated.key();
        let q = Query {
            task: Task::Reconstruction,
            prompt: &prompt,
            key: &key,
            text: &modulated.text,
            substitutions: &modulated.substitutions,
            count: modulated.substitutions.len(),
            trial_index,
        };
        let (raw, hit) = self.query_raw(&q, 0)?;
        let words = parse_reconstruction(&raw, modulated.substitutions.len());
        self.log(&q, 0, raw, Parsed::Words(words.clone()), hit);
        Ok(words)
    }
}

/// Strict majority of `true`; abstains count as `false`.
pub fn majority(verdicts: &[Option<bool>]) -> bool {
    let yes = verdicts.iter().filter(|v| **v == Some(true)).count();
    yes * 2 > verdicts.len()
}

/// Summary of backend usage, for run logs.
pub fn call_summary(evaluators: &[&Evaluator]) -> BTreeMap<String, usize> {
    evaluators
        .iter()
        .map(|e| (e.id().to_string(), e.backend_calls()))
        .collect()
}
