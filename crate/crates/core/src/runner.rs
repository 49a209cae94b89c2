//! Detection and understanding experiments over a modulated dataset.
//!
//! Each experiment produces one [`RateSeries`] per strategy with six points:
//! level 0 (the unmodified sentences) and levels 1–5. Items are evaluated in
//! parallel within the evaluator's in-flight limit and merged in dataset
//! order, so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, ItemKey};
use crate::modulation::{MeaningAudit, ModulatedDataset, ModulatedItem, MAX_LEVEL};
use crate::similarity::{understanding_verdict, DEFAULT_THRESHOLD};
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Detection,
    Understanding,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::Detection, Measure::Understanding];

    pub fn key(self) -> &'static str {
        match self {
            Measure::Detection => "detection",
            Measure::Understanding => "understanding",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "detection" | "detect" => Ok(Measure::Detection),
            "understanding" | "understand" => Ok(Measure::Understanding),
            _ => Err(format!("unknown task `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub level: u8,
    pub rate: f64,
    /// Items that produced a verdict.
    pub n: usize,
    /// Items whose verdict was positive; `rate == count / n`.
    pub count: usize,
    /// Items whose evaluation failed.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub measure: Measure,
    pub evaluator_id: String,
    pub strategy: Strategy,
    pub points: Vec<RatePoint>,
    /// Some cell lost more than the configured fraction of its items.
    pub degraded: bool,
}

impl RateSeries {
    /// `(level, rate)` pairs for fitting.
    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.level as f64, p.rate)).collect()
    }

    pub fn is_monotone_non_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].rate <= w[0].rate)
    }
}

/// Verdict for one item at one level. `verdict` is `None` when evaluation
/// failed; the error is kept for the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub measure: Measure,
    pub evaluator_id: String,
    pub key: ItemKey,
    pub verdict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub similarity_threshold: f64,
    /// Drop items audited as meaning-broken from understanding cells.
    pub audit_drop: bool,
    /// A cell with more than this fraction of failed items marks its series
    /// degraded.
    pub degraded_fraction: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_THRESHOLD,
            audit_drop: false,
            degraded_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub series: Vec<RateSeries>,
    pub outcomes: Vec<ItemOutcome>,
}

impl RunResult {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.verdict.is_none()).count()
    }
}

/// The unmodified sentence behind each base id, recovered from the
/// dataset's substitution records.
pub fn base_texts(dataset: &ModulatedDataset) -> BTreeMap<&str, String> {
    let mut out = BTreeMap::new();
    for it in &dataset.items {
        out.entry(it.base_id.as_str()).or_insert_with(|| it.restore());
    }
    out
}

fn pool(evaluator: &Evaluator) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(evaluator.config().max_in_flight.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

fn outcome(measure: Measure, evaluator: &Evaluator, key: ItemKey, r: Result<(bool, Option<f64>)>) -> ItemOutcome {
    let (verdict, sim, error) = match r {
        Ok((v, s)) => (Some(v), s, None),
        Err(e) => {
            log::warn!("{} {} {key}: {e}", evaluator.id(), measure);
            (None, None, Some(e.to_string()))
        }
    };
    ItemOutcome {
        measure,
        evaluator_id: evaluator.id().to_string(),
        key,
        verdict,
        mean_similarity: sim,
        error,
    }
}

/// Aggregates per-item outcomes into one series per strategy. Level-0
/// outcomes (no strategy) are shared by every series; for understanding,
/// level 0 is fixed at 1.0 over `base_count` items.
pub fn series_from_outcomes(
    measure: Measure,
    evaluator_id: &str,
    outcomes: &[ItemOutcome],
    base_count: usize,
    degraded_fraction: f64,
) -> Vec<RateSeries> {
    let cell = |strategy: Option<Strategy>, level: u8| {
        let mut p = RatePoint {
            level,
            rate: 0.0,
            n: 0,
            count: 0,
            failed: 0,
        };
        for o in outcomes
            .iter()
            .filter(|o| o.key.strategy == strategy && o.key.level == level)
        {
            match o.verdict {
                Some(v) => {
                    p.n += 1;
                    p.count += v as usize;
                }
                None => p.failed += 1,
            }
        }
        if p.n > 0 {
            p.rate = p.count as f64 / p.n as f64;
        }
        p
    };
    let level0 = match measure {
        Measure::Detection => cell(None, 0),
        Measure::Understanding => RatePoint {
            level: 0,
            rate: 1.0,
            n: base_count,
            count: base_count,
            failed: 0,
        },
    };
    Strategy::ALL
        .iter()
        .map(|&s| {
            let mut points = vec![level0];
            points.extend((1..=MAX_LEVEL).map(|l| cell(Some(s), l)));
            let degraded = points.iter().any(|p| {
                let total = p.n + p.failed;
                total == 0 || p.failed as f64 > degraded_fraction * total as f64
            });
            RateSeries {
                measure,
                evaluator_id: evaluator_id.to_string(),
                strategy: s,
                points,
                degraded,
            }
        })
        .collect()
}

/// Majority-vote detection on every base sentence and modulated item.
pub fn run_detection(dataset: &ModulatedDataset, evaluator: &Evaluator, opts: &RunOptions) -> Result<RunResult> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let bases = base_texts(dataset);
    let pool = pool(evaluator)?;
    let outcomes = pool.install(|| {
        let mut out: Vec<ItemOutcome> = bases
            .par_iter()
            .map(|(id, text)| {
                let key = ItemKey::base(id);
                let r = evaluator.majority_detect(&key, text, &[]).map(|v| (v, None));
                outcome(Measure::Detection, evaluator, key, r)
            })
            .collect();
        out.par_extend(dataset.items.par_iter().map(|it| {
            let key = it.key();
            let r = evaluator
                .majority_detect(&key, &it.text, &it.substitutions)
                .map(|v| (v, None));
            outcome(Measure::Detection, evaluator, key, r)
        }));
        out
    });
    Ok(RunResult {
        series: series_from_outcomes(
            Measure::Detection,
            evaluator.id(),
            &outcomes,
            bases.len(),
            opts.degraded_fraction,
        ),
        outcomes,
    })
}

fn understood(evaluator: &Evaluator, it: &ModulatedItem, threshold: f64) -> Result<(bool, Option<f64>)> {
    let words = evaluator.reconstruct(it, 0)?;
    let sim = crate::similarity::mean_similarity(it, &words)?;
    Ok((understanding_verdict(it, &words, threshold)?, Some(sim)))
}

/// One reconstruction per modulated item, scored against the threshold.
pub fn run_understanding(dataset: &ModulatedDataset, evaluator: &Evaluator, opts: &RunOptions) -> Result<RunResult> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let base_count = base_texts(dataset).len();
    let pool = pool(evaluator)?;
    let outcomes: Vec<ItemOutcome> = pool.install(|| {
        dataset
            .items
            .par_iter()
            .filter(|it| !(opts.audit_drop && it.meaning_audit == MeaningAudit::Broken))
            .map(|it| {
                let r = understood(evaluator, it, opts.similarity_threshold);
                outcome(Measure::Understanding, evaluator, it.key(), r)
            })
            .collect()
    });
    Ok(RunResult {
        series: series_from_outcomes(
            Measure::Understanding,
            evaluator.id(),
            &outcomes,
            base_count,
            opts.degraded_fraction,
        ),
        outcomes,
    })
}

/// First line of every CSV artifact: `# manifest: <hash>`.
pub fn manifest_comment(manifest_hash: &str) -> String {
    format!("# manifest: {manifest_hash}\n")
}

/// Reads the manifest hash from a `# manifest:` first line, if present.
pub fn read_manifest_comment(src: &str) -> Option<&str> {
    src.lines().next()?.strip_prefix("# manifest:").map(str::trim)
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    task: Measure,
    evaluator: String,
    strategy: Strategy,
    level: u8,
    rate: f64,
    n: usize,
    count: usize,
    failed: usize,
    degraded: bool,
}

pub fn series_to_csv(series: &[RateSeries], manifest_hash: &str) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in series {
        for p in &s.points {
            w.serialize(SeriesRow {
                task: s.measure,
                evaluator: s.evaluator_id.clone(),
                strategy: s.strategy,
                level: p.level,
                rate: p.rate,
                n: p.n,
                count: p.count,
                failed: p.failed,
                degraded: s.degraded,
            })
            .expect("row serializes");
        }
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8");
    manifest_comment(manifest_hash) + &body
}

pub fn write_series_csv(path: &Path, series: &[RateSeries], manifest_hash: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(series_to_csv(series, manifest_hash).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Parses a series CSV, returning the embedded manifest hash and the series
/// in file order.
pub fn read_series_csv(path: &Path) -> Result<(Option<String>, Vec<RateSeries>)> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = read_manifest_comment(&src).map(str::to_string);
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(src.as_bytes());
    let mut out: Vec<RateSeries> = Vec::new();
    for (i, row) in r.deserialize::<SeriesRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        let point = RatePoint {
            level: row.level,
            rate: row.rate,
            n: row.n,
            count: row.count,
            failed: row.failed,
        };
        match out.last_mut() {
            Some(s) if s.measure == row.task && s.evaluator_id == row.evaluator && s.strategy == row.strategy => {
                s.points.push(point)
            }
            _ => out.push(RateSeries {
                measure: row.task,
                evaluator_id: row.evaluator,
                strategy: row.strategy,
                points: vec![point],
                degraded: row.degraded,
            }),
        }
    }
    Ok((manifest, out))
}
