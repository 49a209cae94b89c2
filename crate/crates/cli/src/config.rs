//! Run configuration: one TOML document describing inputs, evaluators and
//! analysis settings. Relative paths resolve against the config file's
//! directory; command-line flags override individual fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mumkit_core::mockpop::PopulationSpec;
use mumkit_core::report::Zones;
use mumkit_core::stats::FitBounds;
use mumkit_core::{EvaluatorConfig, Strategy};

use crate::error::CliError;

fn default_tau() -> f64 {
    0.5
}
fn default_similarity() -> f64 {
    mumkit_core::similarity::DEFAULT_THRESHOLD
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_degraded() -> f64 {
    0.2
}
fn default_step() -> f64 {
    mumkit_core::stats::tradeoff::DEFAULT_STEP
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default)]
    pub detection: Option<FitBounds>,
    #[serde(default)]
    pub understanding: Option<FitBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub strategy: Strategy,
    pub means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub lexicon: PathBuf,
    /// Trigger lexicon for mock evaluators.
    #[serde(default)]
    pub triggers: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_similarity")]
    pub similarity_threshold: f64,
    /// Overrides every evaluator's own `trials_per_query`.
    #[serde(default)]
    pub trials_per_query: Option<u8>,
    #[serde(default)]
    pub audit_drop: bool,
    /// CSV of human meaning-audit verdicts.
    #[serde(default)]
    pub audit: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Response cache; defaults to `<out_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_degraded")]
    pub degraded_fraction: f64,
    #[serde(default = "default_step")]
    pub tradeoff_step: f64,
    /// Evaluator that validates and ranks the corpus; defaults to the first.
    #[serde(default)]
    pub rankings: Option<String>,
    #[serde(default)]
    pub fit_bounds: BoundsConfig,
    #[serde(default)]
    pub zones: Option<Zones>,
    pub evaluators: Vec<EvaluatorConfig>,
    #[serde(default)]
    pub population: Option<PopulationSpec>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides, applied after loading.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(src: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(src).map_err(|e| CliError::usage(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&src, &base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.tau {
            self.tau = t;
        }
        if let Some(out) = &o.out {
            // Given on the command line, so relative to the working directory.
            self.out_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn cache_dir(&self) -> PathBuf {
        match &self.cache_dir {
            Some(c) => self.resolve(c),
            None => self.out_dir().join("cache"),
        }
    }

    pub fn bounds(&self) -> (FitBounds, FitBounds) {
        let default = FitBounds::for_levels(mumkit_core::modulation::MAX_LEVEL);
        (
            self.fit_bounds.detection.unwrap_or(default),
            self.fit_bounds.understanding.unwrap_or(default),
        )
    }

    /// Evaluator configs with the run-level trial count applied.
    pub fn evaluators(&self) -> Vec<EvaluatorConfig> {
        self.evaluators
            .iter()
            .cloned()
            .map(|mut e| {
                if let Some(t) = self.trials_per_query {
                    e.trials_per_query = t;
                }
                e
            })
            .collect()
    }

    pub fn ranking_evaluator(&self) -> Result<EvaluatorConfig, CliError> {
        let all = self.evaluators();
        match &self.rankings {
            Some(id) => all
                .into_iter()
                .find(|e| &e.id == id)
                .ok_or_else(|| CliError::usage(format!("rankings evaluator `{id}` is not configured"))),
            None => all
                .into_iter()
                .next()
                .ok_or_else(|| CliError::usage("no evaluators configured")),
        }
    }

    /// Checks ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(CliError::usage(format!("tau {} outside (0, 1)", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(CliError::usage("similarity_threshold outside [0, 1]"));
        }
        if !(self.tradeoff_step.is_finite() && self.tradeoff_step > 0.0) {
            return Err(CliError::usage("tradeoff_step must be positive"));
        }
        if self.evaluators.is_empty() {
            return Err(CliError::usage("no evaluators configured"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for e in self.evaluators() {
            e.validate(true).map_err(CliError::from)?;
            if !ids.insert(e.id.clone()) {
                return Err(CliError::usage(format!("duplicate evaluator id `{}`", e.id)));
            }
            if e.is_mock() && e.triggers.is_none() && self.triggers.is_none() {
                return Err(CliError::usage(format!(
                    "mock evaluator `{}` needs a trigger lexicon (set `triggers`)",
                    e.id
                )));
            }
        }
        let mut paths = vec![("corpus", self.resolve(&self.corpus)), ("lexicon", self.resolve(&self.lexicon))];
        if let Some(t) = &self.triggers {
            paths.push(("triggers", self.resolve(t)));
        }
        if let Some(a) = &self.audit {
            paths.push(("audit", self.resolve(a)));
        }
        for e in &self.evaluators {
            if let Some(t) = &e.triggers {
                paths.push(("evaluator triggers", self.resolve(Path::new(t))));
            }
            for p in [&e.prompts.detection, &e.prompts.importance, &e.prompts.reconstruction]
                .into_iter()
                .flatten()
            {
                paths.push(("prompt template", self.resolve(Path::new(p))));
            }
        }
        for (what, p) in paths {
            if !p.is_file() {
                return Err(CliError::usage(format!("{what} file not found: {}", p.display())));
            }
        }
        if let Some(s) = &self.sweep {
            if s.means.is_empty() {
                return Err(CliError::usage("sweep needs at least one familiarity mean"));
            }
            if self.population.is_none() {
                return Err(CliError::usage("sweep needs a [population] table"));
            }
        }
        Ok(())
    }
}
