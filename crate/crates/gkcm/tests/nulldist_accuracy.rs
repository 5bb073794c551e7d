//! Numerical accuracy of the weighted chi-square tail computations.

mod util;

use rand::Rng;

use gkcm::nulldist::{pvalue_imhof, pvalue_mc, pvalue_moment, quantile, GchisqDist};
use gkcm::seed;

fn random_lambdas(rng: &mut impl Rng) -> Vec<f64> {
    let d = rng.random_range(1..=30usize);
    (0..d)
        .map(|_| {
            // Mix of scales, including near-negligible components.
            let u: f64 = rng.random_range(0.0..1.0);
            if u < 0.2 {
                rng.random_range(1e-6..1e-3)
            } else {
                rng.random_range(0.05..4.0)
            }
        })
        .collect()
}

#[test]
fn imhof_agrees_with_monte_carlo_everywhere_in_the_bulk() {
    let mc_n = 200_000;
    let mut rng = seed::rng(40_001);
    for case in 0..20u64 {
        let lambdas = random_lambdas(&mut rng);
        let dist = GchisqDist::new(lambdas.clone()).unwrap();
        // Probe the upper tail region the test actually uses.
        let t = quantile(&dist, 0.1).unwrap();

        let imhof = pvalue_imhof(&dist, t).unwrap();
        assert!(!imhof.mc_fallback, "case {case}: quadrature fell back");
        let mc = pvalue_mc(&dist, t, mc_n, seed::mix(40_100, case)).unwrap();

        let se = (mc * (1.0 - mc) / mc_n as f64).sqrt();
        assert!(
            (imhof.p - mc).abs() <= 3.0 * se + 1e-4,
            "case {case} d={}: imhof {} vs mc {} (3se {})",
            lambdas.len(),
            imhof.p,
            mc,
            3.0 * se
        );
    }
}

#[test]
fn extreme_rescaling_leaves_the_pvalue_unchanged() {
    let dist = GchisqDist::new(vec![2.0, 1.0, 0.25]).unwrap();
    let t = 4.0;
    let base = pvalue_imhof(&dist, t).unwrap().p;
    for &c in &[1e-8, 1e8] {
        let scaled = GchisqDist::new(vec![2.0 * c, 1.0 * c, 0.25 * c]).unwrap();
        let p = pvalue_imhof(&scaled, c * t).unwrap().p;
        assert!(
            (p - base).abs() <= 1e-8,
            "scale {c}: {p} vs {base}"
        );
    }
}

#[test]
fn moment_matching_tracks_the_exact_tail_loosely() {
    // Two-moment matching is an approximation; it must still land close to
    // the exact tail at moderate quantiles for balanced spectra and stay a
    // valid probability for badly skewed ones.
    let balanced = GchisqDist::new(vec![1.0, 0.9, 1.1, 1.05, 0.95]).unwrap();
    let t = quantile(&balanced, 0.05).unwrap();
    let pm = pvalue_moment(&balanced, t).unwrap();
    assert!((pm - 0.05).abs() <= 0.02, "balanced: moment {pm} at exact 0.05");

    let mut skewed_lambdas = vec![100.0];
    skewed_lambdas.extend(std::iter::repeat(1.0).take(9));
    let skewed = GchisqDist::new(skewed_lambdas).unwrap();
    let t = quantile(&skewed, 0.05).unwrap();
    let pm = pvalue_moment(&skewed, t).unwrap();
    assert!((0.0..=1.0).contains(&pm));
    assert!((pm - 0.05).abs() <= 0.05, "skewed: moment {pm} at exact 0.05");
}

#[test]
fn quantile_inverts_the_imhof_tail() {
    let mut rng = seed::rng(40_002);
    for case in 0..5u64 {
        let dist = GchisqDist::new(random_lambdas(&mut rng)).unwrap();
        for &alpha in &[0.01, 0.05, 0.5] {
            let q = quantile(&dist, alpha).unwrap();
            let p = pvalue_imhof(&dist, q).unwrap().p;
            assert!(
                (p - alpha).abs() <= 1e-6,
                "case {case} alpha {alpha}: p(q) = {p}"
            );
        }
    }
}

#[test]
fn pvalues_are_probabilities_and_decrease_in_t() {
    let mut rng = seed::rng(40_003);
    for _ in 0..10 {
        let dist = GchisqDist::new(random_lambdas(&mut rng)).unwrap();
        let total: f64 = dist.lambdas().iter().sum();
        let mut last = f64::INFINITY;
        for step in 0..8 {
            let t = total * 0.25 * step as f64;
            let p = pvalue_imhof(&dist, t).unwrap().p;
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= last + 1e-9, "p rose from {last} to {p} at t={t}");
            last = p;
        }
    }
}

#[test]
fn monte_carlo_is_deterministic_across_chunking() {
    let dist = GchisqDist::new(vec![1.5, 0.5, 0.25]).unwrap();
    let a = pvalue_mc(&dist, 2.0, 150_000, 9).unwrap();
    let b = pvalue_mc(&dist, 2.0, 150_000, 9).unwrap();
    assert_eq!(a, b);
}
