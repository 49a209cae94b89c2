//! Statistics over a completed run: fits, rank tests, thresholds,
//! aggregates and trade-off optima, collected into one results document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulation::MAX_LEVEL;
use crate::runner::{ItemOutcome, Measure, RateSeries};
use crate::stats::{
    fit_logistic, imum, item_imum, item_series, mum, spearman, tradeoff, Aggregation, Curve, FitBounds,
    ImumEstimate, ItemImum, LogisticFit, MumEstimate, SpearmanResult, Tradeoff,
};
use crate::strategy::Strategy;

pub const RESULTS_FORMAT: &str = "mumkit-results/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub tau: f64,
    pub detection_bounds: FitBounds,
    pub understanding_bounds: FitBounds,
    pub tradeoff_step: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tau: 0.5,
            detection_bounds: FitBounds::default(),
            understanding_bounds: FitBounds::default(),
            tradeoff_step: crate::stats::tradeoff::DEFAULT_STEP,
        }
    }
}

impl AnalysisOptions {
    pub fn bounds(&self, m: Measure) -> FitBounds {
        match m {
            Measure::Detection => self.detection_bounds,
            Measure::Understanding => self.understanding_bounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub measure: Measure,
    pub evaluator_id: String,
    pub strategy: Strategy,
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<LogisticFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spearman: Option<SpearmanResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imum: Option<ImumEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffResult {
    pub evaluator_id: String,
    pub strategy: Strategy,
    /// `true` when both curves are fitted logistics, `false` when raw rates
    /// were interpolated for at least one of them.
    pub fitted: bool,
    pub result: Tradeoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub format: String,
    pub manifest: String,
    pub options: AnalysisOptions,
    pub series: Vec<SeriesResult>,
    pub mum: Vec<MumEstimate>,
    pub item_imums: Vec<ItemImum>,
    /// Items left out of per-item estimates, with the reason.
    pub excluded_items: Vec<String>,
    pub tradeoffs: Vec<TradeoffResult>,
}

impl Results {
    pub fn get(&self, measure: Measure, evaluator_id: &str, strategy: Strategy) -> Option<&SeriesResult> {
        self.series
            .iter()
            .find(|s| s.measure == measure && s.evaluator_id == evaluator_id && s.strategy == strategy)
    }

    pub fn evaluators(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.series.iter().map(|s| s.evaluator_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn mum_for(&self, measure: Measure, strategy: Strategy, aggregation: Aggregation) -> Vec<&MumEstimate> {
        self.mum
            .iter()
            .filter(|m| m.measure == measure && m.strategy == strategy && m.aggregation == aggregation)
            .collect()
    }
}

/// Fit, Spearman and IMUM for one series. Failures are recorded, not raised.
///
/// The IMUM is censored at the upper fit bound when no observed rate falls
/// below tau.
pub fn analyze_series(series: &RateSeries, opts: &AnalysisOptions) -> SeriesResult {
    let xy = series.xy();
    let mut out = SeriesResult {
        measure: series.measure,
        evaluator_id: series.evaluator_id.clone(),
        strategy: series.strategy,
        degraded: series.degraded,
        fit: None,
        spearman: None,
        imum: None,
        error: None,
    };
    let run = || -> Result<(LogisticFit, SpearmanResult, ImumEstimate)> {
        let fit = fit_logistic(&xy, opts.bounds(series.measure))?;
        let rho = spearman(&xy)?;
        let mut im = imum(&fit, opts.tau, series.measure, &series.evaluator_id, series.strategy)?;
        // A rate that never falls below tau within the tested levels has
        // no observed crossing, whatever the fitted curve extrapolates.
        if xy.iter().all(|&(_, y)| y >= opts.tau) {
            im.value = fit.bounds.hi;
            im.censored = true;
        }
        Ok((fit, rho, im))
    };
    match run() {
        Ok((fit, rho, im)) => {
            if fit.degenerate {
                log::warn!(
                    "{} {} {}: constant series, fit is degenerate",
                    series.evaluator_id, series.measure, series.strategy
                );
            }
            out.fit = Some(fit);
            out.spearman = Some(rho);
            out.imum = Some(im);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

fn curve(series: &RateSeries, result: Option<&SeriesResult>) -> (Curve, bool) {
    match result.and_then(|r| r.fit.as_ref()) {
        Some(f) if !f.degenerate => (Curve::from_fit(f), true),
        _ => (Curve::Points(series.xy()), false),
    }
}

/// Runs every statistic over the given series and per-item outcomes.
pub fn analyze(
    series: &[RateSeries],
    outcomes: &[ItemOutcome],
    opts: &AnalysisOptions,
    manifest: &str,
) -> Result<Results> {
    if !(opts.tau > 0.0 && opts.tau < 1.0) {
        return Err(Error::invalid(format!("tau {} outside (0, 1)", opts.tau)));
    }
    let results: Vec<SeriesResult> = series.iter().map(|s| analyze_series(s, opts)).collect();

    // Across-models medians per (measure, strategy).
    let mut by_cell: BTreeMap<(Measure, Strategy), Vec<ImumEstimate>> = BTreeMap::new();
    for r in &results {
        if let Some(im) = &r.imum {
            by_cell.entry((r.measure, r.strategy)).or_default().push(im.clone());
        }
    }
    let mut mums = Vec::new();
    for ins in by_cell.values() {
        mums.push(mum(ins, Aggregation::AcrossModels)?);
    }

    // Per-item estimates and their across-items means per evaluator.
    let mut item_imums = Vec::new();
    let mut excluded = Vec::new();
    let mut by_item: BTreeMap<(Measure, String, Strategy), Vec<ImumEstimate>> = BTreeMap::new();
    let mut keys: Vec<(Measure, &str, &str)> = outcomes
        .iter()
        .map(|o| (o.measure, o.evaluator_id.as_str(), o.key.base_id.as_str()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    for (measure, eval_id, base_id) in keys {
        for s in Strategy::ALL {
            let r = item_series(outcomes, base_id, s, measure).and_then(|v| {
                item_imum(&v, measure, eval_id, s, base_id, opts.bounds(measure), opts.tau)
            });
            match r {
                Ok(ii) => {
                    by_item
                        .entry((measure, eval_id.to_string(), s))
                        .or_default()
                        .push(ii.estimate.clone());
                    item_imums.push(ii);
                }
                Err(e) => excluded.push(format!("{eval_id} {measure} {base_id} {s}: {e}")),
            }
        }
    }
    for ins in by_item.values() {
        mums.push(mum(ins, Aggregation::AcrossItems)?);
    }

    // Trade-off per evaluator and strategy, where both measures exist.
    let mut tradeoffs = Vec::new();
    for u in series.iter().filter(|s| s.measure == Measure::Understanding) {
        let Some(d) = series.iter().find(|d| {
            d.measure == Measure::Detection && d.evaluator_id == u.evaluator_id && d.strategy == u.strategy
        }) else {
            continue;
        };
        let find = |s: &RateSeries| results.iter().find(|r| r.measure == s.measure && r.evaluator_id == s.evaluator_id && r.strategy == s.strategy);
        let (uc, uf) = curve(u, find(u));
        let (dc, df) = curve(d, find(d));
        match tradeoff(&uc, &dc, MAX_LEVEL as f64, opts.tradeoff_step) {
            Ok(t) => tradeoffs.push(TradeoffResult {
                evaluator_id: u.evaluator_id.clone(),
                strategy: u.strategy,
                fitted: uf && df,
                result: t,
            }),
            Err(e) => log::warn!("trade-off {} {}: {e}", u.evaluator_id, u.strategy),
        }
    }

    Ok(Results {
        format: RESULTS_FORMAT.to_string(),
        manifest: manifest.to_string(),
        options: opts.clone(),
        series: results,
        mum: mums,
        item_imums,
        excluded_items: excluded,
        tradeoffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::RatePoint;

    fn series(rates: &[f64]) -> RateSeries {
        RateSeries {
            measure: Measure::Understanding,
            evaluator_id: "e".into(),
            strategy: Strategy::UnknownSpelling,
            points: rates
                .iter()
                .enumerate()
                .map(|(d, &rate)| RatePoint {
                    level: d as u8,
                    rate,
                    n: 20,
                    count: (rate * 20.0).round() as usize,
                    failed: 0,
                })
                .collect(),
            degraded: false,
        }
    }

    #[test]
    fn no_observed_crossing_is_censored_at_the_bound() {
        let opts = AnalysisOptions::default();
        let r = analyze_series(&series(&[1.0, 0.8, 0.6, 0.55, 0.55, 0.5]), &opts);
        let im = r.imum.unwrap();
        assert!(im.censored);
        assert_eq!(im.value, opts.understanding_bounds.hi);
        // The fit itself is untouched and crosses inside the range.
        assert!(r.fit.unwrap().x0 < opts.understanding_bounds.hi);
    }

    #[test]
    fn observed_crossing_uses_the_fit() {
        let opts = AnalysisOptions::default();
        let r = analyze_series(&series(&[1.0, 0.9, 0.7, 0.4, 0.2, 0.1]), &opts);
        let (fit, im) = (r.fit.unwrap(), r.imum.unwrap());
        assert!(!im.censored);
        assert_eq!(im.value, fit.x0);
    }
}
