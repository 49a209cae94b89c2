//! Two-parameter logistic fit `y = 1 / (1 + exp(k (x - x0)))`.
//!
//! A declining series has `k > 0`. The fit runs a coarse grid search over
//! `k` and the bounded `x0`, then refines the best starting points with a
//! projected Levenberg–Marquardt iteration that treats parameters sitting on
//! a bound as inactive when the gradient pushes outward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Steepness search range of the coarse grid.
pub const GRID_K: f64 = 10.0;
/// Hard box on `|k|` during refinement; step-like series approach it.
pub const K_MAX: f64 = 50.0;
pub const GRADIENT_TOL: f64 = 1e-9;
pub const BOUND_TOL: f64 = 1e-6;
const PARAMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FitClass {
    Poor,
    Moderate,
    Strong,
}

impl std::fmt::Display for FitClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitClass::Poor => "Poor",
            FitClass::Moderate => "Moderate",
            FitClass::Strong => "Strong",
        })
    }
}

/// Strong above 0.90, Moderate in `[0.40, 0.90]`, Poor below.
pub fn classify_fit(adj_r2: f64) -> FitClass {
    if adj_r2 > 0.90 {
        FitClass::Strong
    } else if adj_r2 >= 0.40 {
        FitClass::Moderate
    } else {
        FitClass::Poor
    }
}

/// `1 - (1 - r2) (n - 1) / (n - p - 1)` with `p = 2`.
pub fn adjusted_r2(r2: f64, n: usize) -> f64 {
    let n = n as f64;
    let p = PARAMS as f64;
    1.0 - (1.0 - r2) * (n - 1.0) / (n - p - 1.0)
}

/// Most frequent class; ties go to the weaker class.
pub fn majority_class(classes: &[FitClass]) -> Option<FitClass> {
    let count = |c: FitClass| classes.iter().filter(|x| **x == c).count();
    let best = [FitClass::Strong, FitClass::Moderate, FitClass::Poor]
        .into_iter()
        .map(|c| (count(c), c))
        .filter(|(n, _)| *n > 0)
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))?;
    Some(best.1)
}

pub fn logistic(x: f64, k: f64, x0: f64) -> f64 {
    let z = k * (x - x0);
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub lo: f64,
    pub hi: f64,
}

impl FitBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("fit bounds [{lo}, {hi}] are not an interval")));
        }
        Ok(Self { lo, hi })
    }

    /// `[-1, max_level + 1]`.
    pub fn for_levels(max_level: u8) -> Self {
        Self {
            lo: -1.0,
            hi: max_level as f64 + 1.0,
        }
    }

    pub fn at_bound(&self, x: f64) -> bool {
        (x - self.lo).abs() < BOUND_TOL || (x - self.hi).abs() < BOUND_TOL
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

impl Default for FitBounds {
    fn default() -> Self {
        Self::for_levels(crate::modulation::MAX_LEVEL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub k: f64,
    pub x0: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub rmse: f64,
    pub ssr: f64,
    pub fit_class: FitClass,
    /// `x0` within 1e-6 of a bound.
    pub censored: bool,
    /// Projected gradient reached the tolerance.
    pub converged: bool,
    /// Constant input: no inflection can be identified.
    pub degenerate: bool,
    pub n: usize,
    pub bounds: FitBounds,
}

impl LogisticFit {
    pub fn predict(&self, x: f64) -> f64 {
        logistic(x, self.k, self.x0)
    }
}

pub fn ssr(points: &[(f64, f64)], k: f64, x0: f64) -> f64 {
    points
        .iter()
        .map(|&(x, y)| (y - logistic(x, k, x0)).powi(2))
        .sum()
}

/// Gradient of SSR and the Gauss–Newton normal matrix `J^T J`.
fn normal_equations(points: &[(f64, f64)], k: f64, x0: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for &(x, y) in points {
        let f = logistic(x, k, x0);
        let s = f * (1.0 - f);
        let j = [-s * (x - x0), s * k];
        let r = y - f;
        for a in 0..2 {
            g[a] += -2.0 * j[a] * r;
            for b in 0..2 {
                h[a][b] += j[a] * j[b];
            }
        }
    }
    (g, h)
}

struct Box2 {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Box2 {
    /// Components that may move: not pinned at a bound by an outward-pointing
    /// descent direction.
    fn free(&self, p: [f64; 2], g: [f64; 2]) -> [bool; 2] {
        let mut free = [true; 2];
        for i in 0..2 {
            let at_lo = p[i] - self.lo[i] <= 1e-12 && g[i] > 0.0;
            let at_hi = self.hi[i] - p[i] <= 1e-12 && g[i] < 0.0;
            free[i] = !(at_lo || at_hi);
        }
        free
    }

    fn projected_gradient_norm(&self, p: [f64; 2], g: [f64; 2]) -> f64 {
        let free = self.free(p, g);
        (0..2).filter(|&i| free[i]).map(|i| g[i] * g[i]).sum::<f64>().sqrt()
    }

    fn project(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.lo[0], self.hi[0]), p[1].clamp(self.lo[1], self.hi[1])]
    }
}

/// Projected Levenberg–Marquardt from `start`. Returns the final point and
/// whether the projected gradient met the tolerance.
fn refine(points: &[(f64, f64)], b: &Box2, start: [f64; 2]) -> ([f64; 2], bool) {
    let mut p = b.project(start);
    let mut cost = ssr(points, p[0], p[1]);
    let mut lambda = 1e-3;
    for _ in 0..2000 {
        let (g, h) = normal_equations(points, p[0], p[1]);
        if b.projected_gradient_norm(p, g) < GRADIENT_TOL {
            return (p, true);
        }
        let free = b.free(p, g);
        let mut improved = false;
        while lambda < 1e20 {
            // Solve (H + λ diag(H)) δ = -g/2 on the free components.
            let mut a = h;
            for i in 0..2 {
                a[i][i] += lambda * h[i][i].max(1e-12);
            }
            let rhs = [-g[0] / 2.0, -g[1] / 2.0];
            let delta = match free {
                [true, true] => {
                    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                    if det.abs() < 1e-300 {
                        [0.0, 0.0]
                    } else {
                        [
                            (rhs[0] * a[1][1] - rhs[1] * a[0][1]) / det,
                            (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det,
                        ]
                    }
                }
                [true, false] => [rhs[0] / a[0][0], 0.0],
                [false, true] => [0.0, rhs[1] / a[1][1]],
                [false, false] => [0.0, 0.0],
            };
            let cand = b.project([p[0] + delta[0], p[1] + delta[1]]);
            let c = ssr(points, cand[0], cand[1]);
            if c < cost {
                p = cand;
                cost = c;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            let (g, _) = normal_equations(points, p[0], p[1]);
            return (p, b.projected_gradient_norm(p, g) < GRADIENT_TOL);
        }
    }
    let (g, _) = normal_equations(points, p[0], p[1]);
    (p, b.projected_gradient_norm(p, g) < GRADIENT_TOL)
}

fn grid(lo: f64, hi: f64, steps: usize) -> impl Iterator<Item = f64> {
    (0..=steps).map(move |i| lo + (hi - lo) * i as f64 / steps as f64)
}

/// Least-squares logistic fit with `x0` constrained to `bounds`.
pub fn fit_logistic(points: &[(f64, f64)], bounds: FitBounds) -> Result<LogisticFit> {
    let n = points.len();
    if n < 4 {
        return Err(Error::invalid(format!("logistic fit needs at least 4 points, got {n}")));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !x.is_finite() || !(0.0..=1.0).contains(y))
    {
        return Err(Error::invalid(format!("point ({x}, {y}) outside the unit rate range")));
    }
    let mean = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sst: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    if sst < 1e-15 {
        // No inflection is identifiable. Place it beyond the range on the
        // side the data sits on: a level series at or above one half never
        // drops below it within the bounds.
        let x0 = if mean >= 0.5 { bounds.hi } else { bounds.lo };
        let s = ssr(points, 0.0, x0);
        return Ok(LogisticFit {
            k: 0.0,
            x0,
            r2: 0.0,
            adj_r2: adjusted_r2(0.0, n),
            rmse: (s / n as f64).sqrt(),
            ssr: s,
            fit_class: classify_fit(adjusted_r2(0.0, n)),
            censored: true,
            converged: false,
            degenerate: true,
            n,
            bounds,
        });
    }

    let b = Box2 {
        lo: [-K_MAX, bounds.lo],
        hi: [K_MAX, bounds.hi],
    };
    let mut starts: Vec<(f64, [f64; 2])> = Vec::new();
    for k in grid(-GRID_K, GRID_K, 80) {
        for x0 in grid(bounds.lo, bounds.hi, 140) {
            starts.push((ssr(points, k, x0), [k, x0]));
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, [f64; 2], bool)> = None;
    let mut tried: Vec<[f64; 2]> = Vec::new();
    for (_, s) in starts {
        if tried.len() >= 4 {
            break;
        }
        if tried
            .iter()
            .any(|t| (t[0] - s[0]).abs() < 1.0 && (t[1] - s[1]).abs() < 0.5)
        {
            continue;
        }
        tried.push(s);
        let (p, converged) = refine(points, &b, s);
        let c = ssr(points, p[0], p[1]);
        let better = match &best {
            None => true,
            Some((bc, _, bconv)) => c < *bc - 1e-15 || ((c - *bc).abs() <= 1e-15 && converged && !bconv),
        };
        if better {
            best = Some((c, p, converged));
        }
    }
    let (s, [k, x0], converged) = best.expect("at least one start");
    let r2 = 1.0 - s / sst;
    let adj = adjusted_r2(r2, n);
    Ok(LogisticFit {
        k,
        x0,
        r2,
        adj_r2: adj,
        rmse: (s / n as f64).sqrt(),
        ssr: s,
        fit_class: classify_fit(adj),
        censored: bounds.at_bound(x0),
        converged,
        degenerate: false,
        n,
        bounds,
    })
}
