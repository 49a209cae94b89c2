//! Simulated populations of mock readers with varying familiarity.
//!
//! Each agent draws its own familiarity per strategy and its own noise seed.
//! An agent understands a modulated item when it recognizes every replaced
//! word, each with probability equal to its familiarity, so the expected
//! population rate at level d is the mean of `f^d` over agents.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::mock::recognizes;
use crate::evaluator::TriggerLexicon;
use crate::hashing::{unit_draw, FieldHasher};
use crate::modulation::ModulatedDataset;
use crate::runner::{base_texts, series_from_outcomes, ItemOutcome, Measure, RateSeries};
use crate::stats::{fit_logistic, FitBounds, LogisticFit};
use crate::strategy::Strategy;
use crate::text::tokenize;
use crate::evaluator::ItemKey;

pub const POPULATION_ID: &str = "population";

fn default_size() -> usize {
    200
}

/// Familiarity drawn uniformly from `[mean - spread, mean + spread]`,
/// clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Familiarity {
    pub mean: f64,
    #[serde(default)]
    pub spread: f64,
}

impl Familiarity {
    pub fn fixed(mean: f64) -> Self {
        Self { mean, spread: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub familiarity: BTreeMap<Strategy, Familiarity>,
    pub default_familiarity: Familiarity,
    /// Probability that a detector agent flags a replaced trigger.
    #[serde(default)]
    pub detector_sensitivity: f64,
}

impl PopulationSpec {
    pub fn uniform(size: usize, mean: f64, seed: u64) -> Self {
        Self {
            size,
            seed,
            familiarity: BTreeMap::new(),
            default_familiarity: Familiarity::fixed(mean),
            detector_sensitivity: 0.0,
        }
    }

    pub fn with(mut self, strategy: Strategy, f: Familiarity) -> Self {
        self.familiarity.insert(strategy, f);
        self
    }

    fn familiarity_spec(&self, strategy: Strategy) -> Familiarity {
        self.familiarity
            .get(&strategy)
            .copied()
            .unwrap_or(self.default_familiarity)
    }

    /// Agent `a`'s familiarity with `strategy`.
    pub fn agent_familiarity(&self, agent: usize, strategy: Strategy) -> f64 {
        let f = self.familiarity_spec(strategy);
        let mut h = FieldHasher::new("agent-familiarity-v1");
        h.num(self.seed).num(agent as u64).field(strategy.key());
        let u = unit_draw(h);
        (f.mean + f.spread * (2.0 * u - 1.0)).clamp(0.0, 1.0)
    }

    pub fn agent_noise_seed(&self, agent: usize) -> u64 {
        let mut h = FieldHasher::new("agent-noise-v1");
        h.num(self.seed).num(agent as u64);
        h.u64()
    }

    fn check(&self, dataset: &ModulatedDataset) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("population size is 0"));
        }
        if dataset.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        Ok(())
    }
}

/// Pools (agent, item) verdicts into one series per strategy; the series'
/// `n` counts agent-item pairs.
fn pooled(measure: Measure, per_agent: Vec<Vec<ItemOutcome>>, base_count: usize) -> Vec<RateSeries> {
    let agents = per_agent.len();
    let all: Vec<ItemOutcome> = per_agent.into_iter().flatten().collect();
    series_from_outcomes(measure, POPULATION_ID, &all, base_count * agents, 0.2)
}

fn verdict(measure: Measure, key: ItemKey, v: bool) -> ItemOutcome {
    ItemOutcome {
        measure,
        evaluator_id: POPULATION_ID.to_string(),
        key,
        verdict: Some(v),
        mean_similarity: None,
        error: None,
    }
}

/// Fraction of (agent, item) pairs understood per strategy and level.
pub fn simulate_population_understanding(spec: &PopulationSpec, dataset: &ModulatedDataset) -> Result<Vec<RateSeries>> {
    spec.check(dataset)?;
    let per_agent: Vec<Vec<ItemOutcome>> = (0..spec.size)
        .into_par_iter()
        .map(|a| {
            let seed = spec.agent_noise_seed(a);
            dataset
                .items
                .iter()
                .map(|it| {
                    let f = spec.agent_familiarity(a, it.strategy);
                    let ok = it.substitutions.iter().all(|s| {
                        recognizes(seed, "reconstruct", it.strategy, &it.base_id, s.token_index, f)
                    });
                    verdict(Measure::Understanding, it.key(), ok)
                })
                .collect()
        })
        .collect();
    Ok(pooled(Measure::Understanding, per_agent, base_texts(dataset).len()))
}

/// Fraction of (agent, item) pairs flagged: a surviving trigger always
/// flags; each replaced trigger is flagged with `detector_sensitivity`.
pub fn simulate_population_detection(
    spec: &PopulationSpec,
    dataset: &ModulatedDataset,
    triggers: &TriggerLexicon,
) -> Result<Vec<RateSeries>> {
    spec.check(dataset)?;
    let bases = base_texts(dataset);
    let has_trigger = |text: &str| tokenize(text).iter().any(|t| triggers.is_trigger(t.surface));
    let per_agent: Vec<Vec<ItemOutcome>> = (0..spec.size)
        .into_par_iter()
        .map(|a| {
            let seed = spec.agent_noise_seed(a);
            let mut out: Vec<ItemOutcome> = bases
                .iter()
                .map(|(id, text)| verdict(Measure::Detection, ItemKey::base(id), has_trigger(text)))
                .collect();
            out.extend(dataset.items.iter().map(|it| {
                let flagged = has_trigger(&it.text)
                    || it.substitutions.iter().any(|s| {
                        triggers.is_trigger(&s.original)
                            && recognizes(seed, "detect", it.strategy, &it.base_id, s.token_index, spec.detector_sensitivity)
                    });
                verdict(Measure::Detection, it.key(), flagged)
            }));
            out
        })
        .collect();
    Ok(pooled(Measure::Detection, per_agent, bases.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub familiarity_mean: f64,
    pub series: RateSeries,
    pub fit: LogisticFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub strategy: Strategy,
    pub rows: Vec<SweepRow>,
    /// Fitted x0 never decreases along the grid. A violation is a finding,
    /// not an error.
    pub monotone: bool,
}

/// Simulates understanding at each familiarity mean (applied to
/// `strategy`) and fits the resulting curve.
pub fn sweep_common_ground(
    base: &PopulationSpec,
    means: &[f64],
    strategy: Strategy,
    dataset: &ModulatedDataset,
    bounds: FitBounds,
) -> Result<Sweep> {
    if means.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    let mut rows = Vec::new();
    for &m in means {
        let spread = base.familiarity_spec(strategy).spread;
        let spec = base.clone().with(strategy, Familiarity { mean: m, spread });
        let series = simulate_population_understanding(&spec, dataset)?
            .into_iter()
            .find(|s| s.strategy == strategy)
            .expect("one series per strategy");
        let fit = fit_logistic(&series.xy(), bounds)?;
        rows.push(SweepRow {
            familiarity_mean: m,
            series,
            fit,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].fit.x0 >= w[0].fit.x0);
    if !monotone {
        log::warn!("common-ground sweep for {strategy}: fitted x0 is not monotone in familiarity");
    }
    Ok(Sweep {
        strategy,
        rows,
        monotone,
    })
}

/// CSV with columns `strategy, familiarity_mean, k, x0, r2, censored`.
pub fn sweep_to_csv(sweep: &Sweep, manifest_hash: &str) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["strategy", "familiarity_mean", "k", "x0", "r2", "censored"])
        .expect("header");
    for r in &sweep.rows {
        w.write_record([
            sweep.strategy.key().to_string(),
            format!("{}", r.familiarity_mean),
            format!("{:.6}", r.fit.k),
            format!("{:.6}", r.fit.x0),
            format!("{:.6}", r.fit.r2),
            r.fit.censored.to_string(),
        ])
        .expect("row");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8");
    crate::runner::manifest_comment(manifest_hash) + &body
}
