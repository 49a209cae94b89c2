//! Deterministic offline evaluator.
//!
//! Detection is a keyword match against a trigger lexicon. A replaced
//! trigger is still recognized when a hashed uniform draw falls below the
//! strategy's familiarity; reconstruction inverts the modulation lexicon
//! under the same kind of draw. Draws depend on the item, strategy and token
//! position but not on the level, so a word recognized at one level is
//! recognized at every level. That makes per-item detection monotone in the
//! level and the expected understanding rate at level d equal to `f^d`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Backend, Query, Task};
use crate::corpus::is_stopword;
use crate::error::{Error, Result};
use crate::hashing::{unit_draw, FieldHasher};
use crate::lexicon::{preimages, Lexicon};
use crate::modulation::Substitution;
use crate::strategy::Strategy;
use crate::text::{casefold, tokenize};

const PREIMAGE_LIMIT: usize = 512;

/// Mock-only knowledge shared between the evaluator and the text producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommonGround {
    /// Per-strategy familiarity in `[0, 1]`, keyed by strategy name.
    #[serde(default)]
    pub familiarity: BTreeMap<Strategy, f64>,
    #[serde(default)]
    pub default_familiarity: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

impl CommonGround {
    pub fn uniform(familiarity: f64, noise_seed: u64) -> Self {
        Self {
            familiarity: BTreeMap::new(),
            default_familiarity: familiarity,
            noise_seed,
        }
    }

    pub fn with(mut self, strategy: Strategy, familiarity: f64) -> Self {
        self.familiarity.insert(strategy, familiarity);
        self
    }

    pub fn familiarity(&self, strategy: Strategy) -> f64 {
        self.familiarity
            .get(&strategy)
            .copied()
            .unwrap_or(self.default_familiarity)
            .clamp(0.0, 1.0)
    }
}

fn default_threshold() -> f64 {
    1.0
}

/// Weighted words the mock treats as salient. Words at or above `threshold`
/// are triggers and make a sentence count as violating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerLexicon {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    /// Extra known words used when undoing rule rewrites.
    #[serde(default)]
    pub vocabulary: Vec<String>,
}

impl TriggerLexicon {
    pub fn parse(src: &str) -> Result<Self> {
        let raw: TriggerLexicon = toml::from_str(src).map_err(|e| Error::invalid(format!("trigger lexicon: {e}")))?;
        Ok(Self {
            threshold: raw.threshold,
            weights: raw.weights.into_iter().map(|(w, v)| (casefold(&w), v)).collect(),
            vocabulary: raw.vocabulary.iter().map(|w| casefold(w)).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src).map_err(|e| match e {
            Error::Invalid(m) => Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: m,
            },
            other => other,
        })
    }

    pub fn weight(&self, word: &str) -> Option<f64> {
        self.weights.get(&casefold(word)).copied()
    }

    pub fn is_trigger(&self, word: &str) -> bool {
        self.weight(word).is_some_and(|w| w >= self.threshold)
    }

    pub fn version(&self) -> String {
        let mut h = FieldHasher::new("triggers-v1");
        h.num(self.threshold.to_bits());
        for (w, v) in &self.weights {
            h.field(w).num(v.to_bits());
        }
        for w in &self.vocabulary {
            h.field(w);
        }
        h.short()
    }
}

/// Seeded Bernoulli draw shared by the mock evaluator and the population
/// simulator.
pub fn recognizes(
    noise_seed: u64,
    task: &str,
    strategy: Strategy,
    base_id: &str,
    token_index: usize,
    familiarity: f64,
) -> bool {
    let mut h = FieldHasher::new("mock-draw-v1");
    h.num(noise_seed)
        .field(task)
        .field(strategy.key())
        .field(base_id)
        .num(token_index as u64);
    unit_draw(h) < familiarity
}

pub struct MockBackend {
    lexicon: Arc<Lexicon>,
    triggers: Arc<TriggerLexicon>,
    common_ground: CommonGround,
    vocabulary: BTreeSet<String>,
}

impl MockBackend {
    pub fn new(lexicon: Arc<Lexicon>, triggers: Arc<TriggerLexicon>, common_ground: CommonGround) -> Self {
        let mut vocabulary: BTreeSet<String> = triggers.weights.keys().cloned().collect();
        vocabulary.extend(triggers.vocabulary.iter().cloned());
        for s in Strategy::ALL {
            vocabulary.extend(lexicon.section(s).words.keys().cloned());
        }
        Self {
            lexicon,
            triggers,
            common_ground,
            vocabulary,
        }
    }

    /// Adds known words, typically every token of the corpus.
    pub fn with_vocabulary<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.vocabulary
            .extend(words.into_iter().map(|w| casefold(w.as_ref())).filter(|w| !w.is_empty()));
        self
    }

    pub fn common_ground(&self) -> &CommonGround {
        &self.common_ground
    }

    /// Keyword match plus familiarity-gated recognition of replaced triggers.
    pub fn detects(&self, base_id: &str, strategy: Option<Strategy>, text: &str, subs: &[Substitution]) -> bool {
        if tokenize(text).iter().any(|t| self.triggers.is_trigger(t.surface)) {
            return true;
        }
        let Some(strategy) = strategy else {
            return false;
        };
        let f = self.common_ground.familiarity(strategy);
        subs.iter().any(|s| {
            self.triggers.is_trigger(&s.original)
                && recognizes(self.common_ground.noise_seed, "detect", strategy, base_id, s.token_index, f)
        })
    }

    /// Best guess at the word behind `replacement`, ignoring familiarity.
    pub fn invert(&self, strategy: Strategy, replacement: &str) -> Option<String> {
        let inv = self.lexicon.inverse(strategy, replacement);
        if let Some(w) = inv.iter().find(|w| self.vocabulary.contains(**w)).or(inv.first()) {
            return Some(w.to_string());
        }
        let rules = &self.lexicon.section(strategy).rules;
        if rules.is_empty() {
            return None;
        }
        let known = |w: &String| self.vocabulary.contains(w);
        if let Some(w) = preimages(replacement, rules, PREIMAGE_LIMIT).into_iter().find(known) {
            return Some(w);
        }
        // Words without any rule match were rewritten by doubling the final
        // letter.
        let chars: Vec<char> = casefold(replacement).chars().collect();
        let n = chars.len();
        if n >= 2 && chars[n - 1] == chars[n - 2] {
            let undoubled: String = chars[..n - 1].iter().collect();
            if let Some(w) = preimages(&undoubled, rules, PREIMAGE_LIMIT).into_iter().find(known) {
                return Some(w);
            }
        }
        None
    }

    pub fn reconstructs(&self, base_id: &str, strategy: Strategy, subs: &[Substitution]) -> Vec<String> {
        let f = self.common_ground.familiarity(strategy);
        subs.iter()
            .map(|s| {
                if recognizes(self.common_ground.noise_seed, "reconstruct", strategy, base_id, s.token_index, f) {
                    self.invert(strategy, &s.replacement).unwrap_or_default()
                } else {
                    String::new()
                }
            })
            .collect()
    }

    /// Weighted words by weight (desc), then other content words, in
    /// sentence order on ties.
    pub fn salient(&self, text: &str, count: usize) -> Vec<String> {
        let toks = tokenize(text);
        let mut weighted: Vec<(f64, usize)> = toks
            .iter()
            .filter_map(|t| self.triggers.weight(t.surface).map(|w| (w, t.index)))
            .collect();
        weighted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut order: Vec<usize> = weighted.into_iter().map(|(_, i)| i).collect();
        for t in &toks {
            if !t.surface.is_empty() && !is_stopword(t.surface) && !order.contains(&t.index) {
                order.push(t.index);
            }
        }
        order
            .into_iter()
            .take(count)
            .map(|i| toks[i].surface.to_string())
            .collect()
    }
}

impl Backend for MockBackend {
    fn fingerprint(&self) -> String {
        let mut h = FieldHasher::new("mock-backend-v1");
        h.field(self.lexicon.version()).field(self.triggers.version());
        h.num(self.common_ground.noise_seed)
            .num(self.common_ground.default_familiarity.to_bits());
        for (s, f) in &self.common_ground.familiarity {
            h.field(s.key()).num(f.to_bits());
        }
        for w in &self.vocabulary {
            h.field(w);
        }
        h.short()
    }

    fn respond(&self, q: &Query<'_>) -> Result<String> {
        Ok(match q.task {
            Task::Detection => {
                let yes = self.detects(&q.key.base_id, q.key.strategy, q.text, q.substitutions);
                if yes { "Yes" } else { "No" }.to_string()
            }
            Task::Importance => self.salient(q.text, q.count).join(", "),
            Task::Reconstruction => {
                let strategy = q
                    .key
                    .strategy
                    .ok_or_else(|| Error::invalid("reconstruction query on a base item"))?;
                self.reconstructs(&q.key.base_id, strategy, q.substitutions)
                    .iter()
                    .enumerate()
                    .map(|(i, w)| format!("{}. {}", i + 1, w))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        })
    }

    fn is_remote(&self) -> bool {
        false
    }
}
