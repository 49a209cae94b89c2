//! Spearman rank correlation with an exact permutation test for small n.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Largest n for which every permutation is enumerated.
pub const EXACT_MAX_N: usize = 8;
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
    pub significant: bool,
    pub n: usize,
    pub exact: bool,
    /// One of the series is constant; rho is reported as 0 and p as 1.
    pub degenerate: bool,
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Calls `f` on every permutation of `items` (Heap's algorithm).
fn for_each_permutation(items: &mut [f64], mut f: impl FnMut(&[f64])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    f(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            f(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Two-sided exact p-value: the share of rank permutations whose |rho| is at
/// least the observed one.
fn exact_p(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let mut perm = ry.to_vec();
    let (mut hits, mut total) = (0u64, 0u64);
    let target = rho.abs() - 1e-12;
    for_each_permutation(&mut perm, |p| {
        total += 1;
        if pearson(rx, p).abs() >= target {
            hits += 1;
        }
    });
    hits as f64 / total as f64
}

fn t_approx_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return f64::MIN_POSITIVE;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Spearman correlation between the x and y coordinates of `points`.
pub fn spearman(points: &[(f64, f64)]) -> Result<SpearmanResult> {
    let n = points.len();
    if n < 4 {
        return Err(Error::invalid(format!("spearman needs at least 4 points, got {n}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(&xs) || constant(&ys) {
        return Ok(SpearmanResult {
            rho: 0.0,
            p_value: 1.0,
            significant: false,
            n,
            exact: n <= EXACT_MAX_N,
            degenerate: true,
        });
    }
    let rx = average_ranks(&xs);
    let ry = average_ranks(&ys);
    let rho = pearson(&rx, &ry);
    let exact = n <= EXACT_MAX_N;
    let p_value = if exact { exact_p(&rx, &ry, rho) } else { t_approx_p(rho, n) };
    Ok(SpearmanResult {
        rho,
        p_value,
        significant: p_value < ALPHA,
        n,
        exact,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(ys: &[f64]) -> Vec<(f64, f64)> {
        ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect()
    }

    #[test]
    fn perfect_decline_exact_p() {
        let r = spearman(&series(&[1.0, 0.9, 0.7, 0.4, 0.2, 0.1])).unwrap();
        assert_eq!(r.rho, -1.0);
        assert!((r.p_value - 2.0 / 720.0).abs() < 1e-12);
        assert!(r.significant);
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
        // ranks of y: [5.5, 5.5, 4, 3, 2, 1] against x ranks 1..6.
        let r = spearman(&series(&[1.0, 1.0, 0.8, 0.5, 0.2, 0.0])).unwrap();
        let rx = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ry = [5.5, 5.5, 4.0, 3.0, 2.0, 1.0];
        assert!((r.rho - pearson(&rx, &ry)).abs() < 1e-15);
        assert!(r.rho < -0.98);
    }

    #[test]
    fn constant_series_is_flagged() {
        let r = spearman(&series(&[1.0; 6])).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.rho, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn monotone_transform_invariance() {
        let ys = [0.9, 0.3, 0.5, 0.1, 0.7, 0.2];
        let a = spearman(&series(&ys)).unwrap();
        let t: Vec<f64> = ys.iter().map(|y: &f64| y.powi(3) + 2.0).collect();
        let b = spearman(&series(&t)).unwrap();
        assert_eq!(a.rho, b.rho);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn large_n_uses_t_approximation() {
        let ys: Vec<f64> = (0..12).map(|i| (i * 7 % 12) as f64).collect();
        let r = spearman(&series(&ys)).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn permutation_count() {
        let mut v = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let mut n = 0;
        for_each_permutation(&mut v, |_| n += 1);
        assert_eq!(n, 120);
    }
}
