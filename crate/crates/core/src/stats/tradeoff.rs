//! Evader's operating point: the level maximizing `U(d) (1 - D(d))`.

use serde::{Deserialize, Serialize};

use super::logistic::{logistic, LogisticFit};
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 0.01;

/// A rate curve over the level axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    Logistic { k: f64, x0: f64 },
    /// Observed `(level, rate)` points, linearly interpolated and held
    /// constant beyond the ends.
    Points(Vec<(f64, f64)>),
}

impl Curve {
    pub fn from_fit(fit: &LogisticFit) -> Self {
        Curve::Logistic { k: fit.k, x0: fit.x0 }
    }

    pub fn eval(&self, d: f64) -> f64 {
        match self {
            Curve::Logistic { k, x0 } => logistic(d, *k, *x0),
            Curve::Points(p) => {
                let (first, last) = (p[0], p[p.len() - 1]);
                if d <= first.0 {
                    return first.1;
                }
                if d >= last.0 {
                    return last.1;
                }
                let i = p.partition_point(|q| q.0 <= d) - 1;
                let (a, b) = (p[i], p[i + 1]);
                a.1 + (b.1 - a.1) * (d - a.0) / (b.0 - a.0)
            }
        }
    }

    fn levels(&self) -> Option<Vec<f64>> {
        match self {
            Curve::Points(p) => Some(p.iter().map(|q| q.0).collect()),
            Curve::Logistic { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tradeoff {
    pub d_star: f64,
    pub objective: f64,
}

/// Maximizes `J(d) = U(d) (1 - D(d))` on `0, step, 2 step, ..., max_level`.
/// The smallest maximizing level wins ties.
pub fn tradeoff(u: &Curve, d: &Curve, max_level: f64, step: f64) -> Result<Tradeoff> {
    if !(step > 0.0 && max_level >= 0.0) {
        return Err(Error::invalid(format!("bad grid: step {step}, max level {max_level}")));
    }
    for c in [u, d] {
        if let Curve::Points(p) = c {
            if p.len() < 2 || p.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::invalid("rate points must have increasing levels"));
            }
        }
    }
    if let (Some(a), Some(b)) = (u.levels(), d.levels()) {
        if a != b {
            return Err(Error::invalid("understanding and detection levels differ"));
        }
    }
    let steps = (max_level / step).round() as usize;
    let mut best = Tradeoff {
        d_star: 0.0,
        objective: f64::NEG_INFINITY,
    };
    for i in 0..=steps {
        let x = (i as f64 * step).min(max_level);
        let j = u.eval(x) * (1.0 - d.eval(x));
        if j > best.objective {
            best = Tradeoff { d_star: x, objective: j };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_detection_gives_zero_at_origin() {
        let u = Curve::Logistic { k: 1.0, x0: 3.0 };
        let d = Curve::Points(vec![(0.0, 1.0), (5.0, 1.0)]);
        let t = tradeoff(&u, &d, 5.0, 0.01).unwrap();
        assert_eq!((t.d_star, t.objective), (0.0, 0.0));
    }

    #[test]
    fn perfect_understanding_and_falling_detection_pushes_to_max() {
        let u = Curve::Points(vec![(0.0, 1.0), (5.0, 1.0)]);
        let d = Curve::Logistic { k: 1.5, x0: 2.0 };
        let t = tradeoff(&u, &d, 5.0, 0.01).unwrap();
        assert!((t.d_star - 5.0).abs() < 1e-12);
    }

    #[test]
    fn interpolates_raw_points() {
        let c = Curve::Points(vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0)]);
        assert_eq!(c.eval(0.5), 0.75);
        assert_eq!(c.eval(-1.0), 1.0);
        assert_eq!(c.eval(9.0), 0.0);
    }

    #[test]
    fn mismatched_domains_rejected() {
        let a = Curve::Points(vec![(0.0, 1.0), (1.0, 0.5)]);
        let b = Curve::Points(vec![(0.0, 1.0), (2.0, 0.5)]);
        assert!(tradeoff(&a, &b, 1.0, 0.01).is_err());
    }
}
