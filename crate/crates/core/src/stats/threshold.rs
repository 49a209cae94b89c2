//! Threshold crossings (IMUM) and their aggregates (MUM).

use serde::{Deserialize, Serialize};

use super::logistic::LogisticFit;
use crate::error::{Error, Result};
use crate::runner::Measure;
use crate::strategy::Strategy;

/// Below this steepness the curve is treated as flat.
pub const FLAT_K: f64 = 1e-6;

/// Where a fitted curve crosses `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub value: f64,
    /// The crossing is not inside the fit bounds (or the fit itself hit a
    /// bound); `value` is then the bound.
    pub censored: bool,
}

/// `x0 + ln(1/tau - 1) / k`, clamped to the fit bounds. At `tau = 0.5` this
/// is exactly `x0` for either sign of `k`.
pub fn crossing(fit: &LogisticFit, tau: f64) -> Result<Crossing> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau {tau} outside (0, 1)")));
    }
    let b = fit.bounds;
    let raw = if tau == 0.5 {
        fit.x0
    } else if fit.k.abs() < FLAT_K {
        return Ok(Crossing {
            value: b.hi,
            censored: true,
        });
    } else {
        fit.x0 + (1.0 / tau - 1.0).ln() / fit.k
    };
    let value = b.clamp(raw);
    Ok(Crossing {
        value,
        censored: fit.censored || value != raw || b.at_bound(value),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImumEstimate {
    pub measure: Measure,
    pub evaluator_id: String,
    pub strategy: Strategy,
    /// Set for per-item estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_id: Option<String>,
    pub tau: f64,
    pub value: f64,
    pub censored: bool,
}

pub fn imum(
    fit: &LogisticFit,
    tau: f64,
    measure: Measure,
    evaluator_id: &str,
    strategy: Strategy,
) -> Result<ImumEstimate> {
    let c = crossing(fit, tau)?;
    Ok(ImumEstimate {
        measure,
        evaluator_id: evaluator_id.to_string(),
        strategy,
        base_id: None,
        tau,
        value: c.value,
        censored: c.censored,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean of per-item estimates.
    AcrossItems,
    /// Median of per-model estimates.
    AcrossModels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MumEstimate {
    pub measure: Measure,
    /// Set when every input comes from the same evaluator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluator_id: Option<String>,
    pub strategy: Strategy,
    pub aggregation: Aggregation,
    pub value: f64,
    /// Every input was censored.
    pub censored: bool,
    pub censored_count: usize,
    pub inputs: Vec<ImumEstimate>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Aggregates estimates for one (measure, strategy). Censored inputs enter
/// at their bound value and are counted.
pub fn mum(inputs: &[ImumEstimate], aggregation: Aggregation) -> Result<MumEstimate> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::invalid("no estimates to aggregate"))?;
    if let Some(x) = inputs
        .iter()
        .find(|e| e.measure != first.measure || e.strategy != first.strategy)
    {
        return Err(Error::invalid(format!(
            "cannot aggregate {} {} with {} {}",
            first.measure, first.strategy, x.measure, x.strategy
        )));
    }
    let values: Vec<f64> = inputs.iter().map(|e| e.value).collect();
    let value = match aggregation {
        Aggregation::AcrossItems => values.iter().sum::<f64>() / values.len() as f64,
        Aggregation::AcrossModels => median(&values),
    };
    let censored_count = inputs.iter().filter(|e| e.censored).count();
    let evaluator_id = inputs
        .iter()
        .all(|e| e.evaluator_id == first.evaluator_id)
        .then(|| first.evaluator_id.clone());
    Ok(MumEstimate {
        measure: first.measure,
        evaluator_id,
        strategy: first.strategy,
        aggregation,
        value,
        censored: censored_count == inputs.len(),
        censored_count,
        inputs: inputs.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::logistic::{FitBounds, FitClass};

    fn fit(k: f64, x0: f64) -> LogisticFit {
        LogisticFit {
            k,
            x0,
            r2: 1.0,
            adj_r2: 1.0,
            rmse: 0.0,
            ssr: 0.0,
            fit_class: FitClass::Strong,
            censored: false,
            converged: true,
            degenerate: false,
            n: 6,
            bounds: FitBounds::default(),
        }
    }

    fn est(v: f64, censored: bool) -> ImumEstimate {
        ImumEstimate {
            measure: Measure::Detection,
            evaluator_id: "m".into(),
            strategy: Strategy::CodeWord,
            base_id: None,
            tau: 0.5,
            value: v,
            censored,
        }
    }

    #[test]
    fn midpoint_is_x0() {
        assert_eq!(crossing(&fit(1.4799, 2.7102), 0.5).unwrap().value, 2.7102);
        assert_eq!(crossing(&fit(-3.0, 1.25), 0.5).unwrap().value, 1.25);
        assert_eq!(crossing(&fit(0.0, 1.25), 0.5).unwrap().value, 1.25);
    }

    #[test]
    fn general_tau_and_clamping() {
        let c = crossing(&fit(2.0, 2.0), 0.6).unwrap();
        assert!((c.value - (2.0 + (1.0f64 / 0.6 - 1.0).ln() / 2.0)).abs() < 1e-15);
        let c = crossing(&fit(0.5, 5.5), 0.2).unwrap();
        assert!(c.censored && c.value == 6.0);
        let c = crossing(&fit(1e-9, 2.0), 0.3).unwrap();
        assert!(c.censored && c.value == 6.0);
        assert!(crossing(&fit(1.0, 2.0), 1.0).is_err());
    }

    #[test]
    fn across_models_median() {
        let ins: Vec<_> = [1.7, 3.7, 2.0, 2.7, 2.6, 2.2, 1.7].iter().map(|v| est(*v, false)).collect();
        let m = mum(&ins, Aggregation::AcrossModels).unwrap();
        assert_eq!(m.value, 2.2);
        let mut rev = ins.clone();
        rev.reverse();
        assert_eq!(mum(&rev, Aggregation::AcrossModels).unwrap().value, 2.2);
    }

    #[test]
    fn censoring_and_single_input() {
        let m = mum(&[est(2.5, false)], Aggregation::AcrossItems).unwrap();
        assert_eq!(m.value, 2.5);
        let all = vec![est(5.1, true); 3];
        let m = mum(&all, Aggregation::AcrossModels).unwrap();
        assert!(m.censored && m.value == 5.1 && m.censored_count == 3);
        assert!(mum(&[], Aggregation::AcrossItems).is_err());
    }
}
