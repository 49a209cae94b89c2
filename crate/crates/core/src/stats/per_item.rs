//! Per-item threshold estimates from 0/1 verdict series.

use serde::{Deserialize, Serialize};

use super::logistic::{fit_logistic, FitBounds, LogisticFit};
use super::threshold::{crossing, ImumEstimate};
use crate::error::{Error, Result};
use crate::runner::{ItemOutcome, Measure};
use crate::strategy::Strategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemImum {
    pub estimate: ImumEstimate,
    pub fit: LogisticFit,
    /// Midpoint between the last level before the verdict flips for good
    /// and the level where it flips; `None` if it never flips.
    pub step_crossing: Option<f64>,
}

/// `L - 0.5` for the first level `L` from which every verdict differs from
/// the level-0 verdict.
pub fn step_crossing(verdicts: &[bool]) -> Option<f64> {
    let base = *verdicts.first()?;
    let mut first = None;
    for (l, v) in verdicts.iter().enumerate().rev() {
        if *v == base {
            break;
        }
        first = Some(l);
    }
    first.map(|l| l as f64 - 0.5)
}

/// The 0/1 series for one item and strategy, level 0 first.
pub fn item_series(outcomes: &[ItemOutcome], base_id: &str, strategy: Strategy, measure: Measure) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    if measure == Measure::Understanding {
        out.push(true);
    }
    let mut levels: Vec<&ItemOutcome> = outcomes
        .iter()
        .filter(|o| {
            o.measure == measure
                && o.key.base_id == base_id
                && (o.key.strategy == Some(strategy) || (o.key.strategy.is_none() && measure == Measure::Detection))
        })
        .collect();
    levels.sort_by_key(|o| o.key.level);
    for o in levels {
        let v = o.verdict.ok_or_else(|| {
            Error::invalid(format!("{}: no verdict for {}", base_id, o.key))
        })?;
        out.push(v);
    }
    if out.len() < 4 {
        return Err(Error::invalid(format!("{base_id}/{strategy}: only {} levels", out.len())));
    }
    Ok(out)
}

/// Fits the item's 0/1 series and extracts its crossing. Detection series
/// whose base sentence was not detected are rejected.
pub fn item_imum(
    verdicts: &[bool],
    measure: Measure,
    evaluator_id: &str,
    strategy: Strategy,
    base_id: &str,
    bounds: FitBounds,
    tau: f64,
) -> Result<ItemImum> {
    if measure == Measure::Detection && verdicts.first() == Some(&false) {
        return Err(Error::invalid(format!(
            "item `{base_id}` is not detected unmodulated; excluded"
        )));
    }
    let points: Vec<(f64, f64)> = verdicts
        .iter()
        .enumerate()
        .map(|(l, v)| (l as f64, if *v { 1.0 } else { 0.0 }))
        .collect();
    let fit = fit_logistic(&points, bounds)?;
    let c = crossing(&fit, tau)?;
    Ok(ItemImum {
        estimate: ImumEstimate {
            measure,
            evaluator_id: evaluator_id.to_string(),
            strategy,
            base_id: Some(base_id.to_string()),
            tau,
            value: c.value,
            censored: c.censored,
        },
        fit,
        step_crossing: step_crossing(verdicts),
    })
}
