//! Statistics checked against independent oracles: closed forms,
//! bisection, permutation enumeration and brute-force grids.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mumkit_core::stats::{
    adjusted_r2, classify_fit, crossing, fit_logistic, logistic, spearman, tradeoff, Curve, FitBounds, FitClass,
};

fn levels(k: f64, x0: f64) -> Vec<(f64, f64)> {
    (0..=5).map(|d| (d as f64, 1.0 / (1.0 + (k * (d as f64 - x0)).exp()))).collect()
}

#[test]
fn adjusted_r2_matches_closed_form() {
    for &r2 in &[0.0, 0.25, 0.9959, 0.9994, 1.0] {
        let oracle = 1.0 - (1.0 - r2) * 5.0 / 3.0;
        assert!((adjusted_r2(r2, 6) - oracle).abs() < 1e-12);
    }
}

#[test]
fn fit_class_boundaries() {
    assert_eq!(classify_fit(0.95), FitClass::Strong);
    assert_eq!(classify_fit(0.90), FitClass::Moderate);
    assert_eq!(classify_fit(0.40), FitClass::Moderate);
    assert_eq!(classify_fit(0.39), FitClass::Poor);
}

#[test]
fn logistic_matches_the_decreasing_sigmoid() {
    for &(x, k, x0) in &[(0.0, 1.0, 2.0), (3.5, 2.5, 1.0), (4.0, -1.0, 2.0)] {
        let oracle = 1.0 / (1.0 + f64::exp(k * (x - x0)));
        assert!((logistic(x, k, x0) - oracle).abs() < 1e-15);
    }
    // Far tails stay finite.
    assert_eq!(logistic(1e4, 10.0, 0.0), 0.0);
    assert_eq!(logistic(-1e4, 10.0, 0.0), 1.0);
}

#[test]
fn noise_free_parameters_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let k = rng.random_range(0.6..3.0);
        let x0 = rng.random_range(1.0..4.0);
        let fit = fit_logistic(&levels(k, x0), FitBounds::default()).unwrap();
        assert!((fit.k - k).abs() < 1e-3, "k {k} fitted {}", fit.k);
        assert!((fit.x0 - x0).abs() < 1e-3, "x0 {x0} fitted {}", fit.x0);
        assert!(fit.r2 > 0.9999);
    }
}

/// Root of `fit(x) - tau` by bisection over a bracket wide enough for
/// every curve used here.
fn bisect(f: impl Fn(f64) -> f64, tau: f64) -> f64 {
    let (mut a, mut b) = (-50.0, 50.0);
    let sa = (f(a) - tau).signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) - tau).signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn crossing_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bounds = FitBounds::new(-40.0, 40.0).unwrap();
    for _ in 0..50 {
        let k = rng.random_range(0.5..3.0);
        let x0 = rng.random_range(1.0..4.0);
        let fit = fit_logistic(&levels(k, x0), bounds).unwrap();
        assert_eq!(crossing(&fit, 0.5).unwrap().value, fit.x0);
        for tau in [0.25, 0.75] {
            let c = crossing(&fit, tau).unwrap();
            let oracle = bisect(|x| fit.predict(x), tau);
            assert!((c.value - oracle).abs() < 1e-6, "tau {tau}: {} vs {oracle}", c.value);
            assert!(!c.censored);
        }
    }
}

/// Spearman by hand: average ranks, Pearson on ranks, and a p-value from
/// enumerating every permutation of the y ranks.
fn oracle_spearman(ys: &[f64]) -> (f64, f64) {
    fn ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|x| {
                let below = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    }
    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
    let rx: Vec<f64> = (1..=ys.len()).map(|i| i as f64).collect();
    let ry = ranks(ys);
    let rho = corr(&rx, &ry);
    let perms: Vec<Vec<f64>> = ry.iter().copied().permutations(ry.len()).collect();
    let hits = perms.iter().filter(|p| corr(&rx, p).abs() >= rho.abs() - 1e-12).count();
    (rho, hits as f64 / perms.len() as f64)
}

#[test]
fn spearman_agrees_with_permutation_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let ys: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
        let got = spearman(&pts).unwrap();
        let (rho, p) = oracle_spearman(&ys);
        assert!((got.rho - rho).abs() < 1e-12);
        assert!((got.p_value - p).abs() < 1e-12);
    }
}

#[test]
fn spearman_with_ties_agrees_with_enumeration() {
    let ys = [1.0, 1.0, 0.8, 0.8, 0.2, 0.0];
    let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
    let got = spearman(&pts).unwrap();
    let (rho, p) = oracle_spearman(&ys);
    assert!((got.rho - rho).abs() < 1e-12);
    assert!((got.p_value - p).abs() < 1e-12);
}

#[test]
fn tradeoff_matches_fine_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..25 {
        let (ku, xu) = (rng.random_range(0.3..3.0), rng.random_range(0.0..5.0));
        let (kd, xd) = (rng.random_range(0.3..3.0), rng.random_range(0.0..5.0));
        let u = Curve::Logistic { k: ku, x0: xu };
        let d = Curve::Logistic { k: kd, x0: xd };
        let got = tradeoff(&u, &d, 5.0, 0.01).unwrap();
        let (mut best_d, mut best_j) = (0.0, f64::NEG_INFINITY);
        for i in 0..=50_000 {
            let x = i as f64 * 1e-4;
            let j = logistic(x, ku, xu) * (1.0 - logistic(x, kd, xd));
            if j > best_j {
                (best_d, best_j) = (x, j);
            }
        }
        assert!((got.d_star - best_d).abs() <= 0.01 + 1e-9, "d* {} vs {best_d}", got.d_star);
        assert!(got.objective <= best_j + 1e-12);
    }
}
