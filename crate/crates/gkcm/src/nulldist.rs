//! Tail probabilities of Σ λ_i V_i² with V_i i.i.d. standard normal.
//!
//! Three routes: characteristic-function inversion (Imhof's integral,
//! default), Satterthwaite-Welch moment matching (fast, approximate), and
//! Monte Carlo (universal fallback and cross-check). Quantiles invert the
//! Imhof p-value by bisection.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::seed;

/// Weighted chi-square distribution; weights kept sorted descending.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GchisqDist {
    lambdas: Vec<f64>,
}

impl GchisqDist {
    pub fn new(lambdas: impl Into<Vec<f64>>) -> Result<Self> {
        let mut lambdas = lambdas.into();
        if lambdas.is_empty() {
            return Err(Error::DegenerateData(
                "weighted chi-square needs at least one weight".into(),
            ));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::DegenerateData(
                "chi-square weights must be finite and nonnegative".into(),
            ));
        }
        if lambdas.iter().all(|l| *l == 0.0) {
            return Err(Error::DegenerateData(
                "at least one chi-square weight must be positive".into(),
            ));
        }
        lambdas.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite weights"));
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

/// Imhof output; `mc_fallback` marks p-values rescued by Monte Carlo after
/// the quadrature failed to localize the integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImhofPvalue {
    pub p: f64,
    pub mc_fallback: bool,
}

const QUAD_ABS_TOL: f64 = 1e-8;
const ENVELOPE_CUTOFF: f64 = 1e-10;
const TAIL_BOUND_CUTOFF: f64 = 1e-9;
const MAX_PANELS: usize = 8_000_000;
const FALLBACK_MC_SAMPLES: usize = 500_000;
const FALLBACK_MC_SEED: u64 = 0x696d_686f_666d_63;

/// P(Σ λ_i V_i² ≥ t) via Imhof's inversion integral
/// p = 1/2 + (1/π)∫₀^∞ sin(θ(u)) / (u·ρ(u)) du,
/// θ(u) = ½Σ atan(λ_i u) − ½tu, ρ(u) = Π(1 + λ_i²u²)^{1/4}.
///
/// Weights and t are rescaled by λ_max first (the p-value is positively
/// homogeneous), then the integral is summed over sub-wavelength panels with
/// adaptive Simpson refinement until either the integrand envelope
/// 1/(u·ρ(u)) drops below 1e-10 or an integration-by-parts bound certifies
/// the remaining tail below 1e-9.
pub fn pvalue_imhof(dist: &GchisqDist, t: f64) -> Result<ImhofPvalue> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("tail point must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(ImhofPvalue {
            p: 1.0,
            mc_fallback: false,
        });
    }
    let scale = dist.lambdas[0];
    let mu: Vec<f64> = dist.lambdas.iter().map(|l| l / scale).collect();
    let tau = t / scale;

    match imhof_integral(&mu, tau) {
        Some(integral) => Ok(ImhofPvalue {
            p: (0.5 + integral / std::f64::consts::PI).clamp(0.0, 1.0),
            mc_fallback: false,
        }),
        None => {
            let p = pvalue_mc(dist, t, FALLBACK_MC_SAMPLES, FALLBACK_MC_SEED)?;
            Ok(ImhofPvalue {
                p,
                mc_fallback: true,
            })
        }
    }
}

fn imhof_integral(mu: &[f64], tau: f64) -> Option<f64> {
    let sum_mu: f64 = mu.iter().sum();
    let theta = |u: f64| 0.5 * (mu.iter().map(|m| (m * u).atan()).sum::<f64>() - tau * u);
    let log_rho = |u: f64| 0.25 * mu.iter().map(|m| (m * u).powi(2).ln_1p()).sum::<f64>();
    let integrand = |u: f64| {
        if u == 0.0 {
            0.5 * (sum_mu - tau)
        } else {
            theta(u).sin() * (-log_rho(u)).exp() / u
        }
    };

    // |θ'| ≤ (Σμ + τ)/2, so this width holds each panel under a quarter
    // oscillation of the sine.
    let width = std::f64::consts::PI / (sum_mu + tau);
    let panel_tol = QUAD_ABS_TOL * width.min(1.0) / 100.0;
    let mut total = 0.0;
    for panel in 0..MAX_PANELS {
        let a = panel as f64 * width;
        let b = a + width;
        total += adaptive_simpson(&integrand, a, b, panel_tol);
        let envelope = (-log_rho(b)).exp() / b;
        if envelope < ENVELOPE_CUTOFF {
            return Some(total);
        }
        let tail_bound = 8.0 / (std::f64::consts::PI * tau * b) * (-log_rho(b)).exp();
        if tail_bound < TAIL_BOUND_CUTOFF {
            return Some(total);
        }
    }
    None
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, fa, b, fb, m, fm, whole, tol, 24)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

const MC_CHUNK: usize = 65_536;

/// Monte Carlo tail estimate with the (k+1)/(N+1) correction, simulated in
/// fixed 65536-sample chunks whose seeds depend only on (seed, chunk index),
/// so the result is identical at any parallelism.
pub fn pvalue_mc(dist: &GchisqDist, t: f64, num_samples: usize, seed_val: u64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("tail point must be finite and >= 0, got {t}")));
    }
    if num_samples < 1000 {
        return Err(Error::Config(format!(
            "monte carlo needs at least 1000 samples, got {num_samples}"
        )));
    }
    let lambdas = &dist.lambdas;
    let chunks = num_samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let size = MC_CHUNK.min(num_samples - c * MC_CHUNK);
            let mut rng = seed::rng(seed::mix(seed_val, c as u64));
            let normal = rand_distr::StandardNormal;
            let mut count = 0u64;
            for _ in 0..size {
                let mut sum = 0.0;
                for &l in lambdas {
                    let v: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
                    sum += l * v * v;
                }
                if sum >= t {
                    count += 1;
                }
            }
            count
        })
        .sum();
    Ok((hits as f64 + 1.0) / (num_samples as f64 + 1.0))
}

/// Satterthwaite-Welch: match mean and variance with g·χ²_ν,
/// g = Σλ²/Σλ, ν = (Σλ)²/Σλ².
pub fn pvalue_moment(dist: &GchisqDist, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("tail point must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let s1: f64 = dist.lambdas.iter().sum();
    let s2: f64 = dist.lambdas.iter().map(|l| l * l).sum();
    let g = s2 / s1;
    let nu = s1 * s1 / s2;
    let chi = ChiSquared::new(nu)
        .map_err(|e| Error::Config(format!("moment matching produced invalid dof {nu}: {e}")))?;
    Ok(chi.sf(t / g).clamp(0.0, 1.0))
}

/// q_α with P(Σ λ_i V_i² ≥ q_α) = α, by bisection on the Imhof p-value.
pub fn quantile(dist: &GchisqDist, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Quantile(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let sum: f64 = dist.lambdas.iter().sum();
    let mut lo = 0.0;
    let mut hi = sum.max(1e-300);
    let mut grew = 0;
    while pvalue_imhof(dist, hi)?.p > alpha {
        hi *= 2.0;
        grew += 1;
        if grew > 200 {
            return Err(Error::Quantile(format!(
                "no bracket for alpha={alpha} below {hi:e}"
            )));
        }
    }
    while hi - lo > 1e-8 * hi {
        let mid = 0.5 * (lo + hi);
        if pvalue_imhof(dist, mid)?.p > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn chi1_tail(t: f64) -> f64 {
        ChiSquared::new(1.0).unwrap().sf(t)
    }

    #[test]
    fn construction_sorts_and_validates() {
        let d = GchisqDist::new(vec![0.5, 2.0, 1.0]).unwrap();
        assert_eq!(d.lambdas(), &[2.0, 1.0, 0.5]);
        assert!(GchisqDist::new(vec![]).is_err());
        assert!(GchisqDist::new(vec![-1.0, 2.0]).is_err());
        assert!(GchisqDist::new(vec![0.0, 0.0]).is_err());
        assert!(GchisqDist::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn imhof_at_zero_is_one() {
        let d = GchisqDist::new(vec![1.0, 0.3]).unwrap();
        let r = pvalue_imhof(&d, 0.0).unwrap();
        assert_eq!(r.p, 1.0);
        assert!(!r.mc_fallback);
    }

    #[test]
    fn imhof_single_weight_matches_chi_square() {
        let d = GchisqDist::new(vec![1.0]).unwrap();
        let r = pvalue_imhof(&d, 3.841459).unwrap();
        assert_abs_diff_eq!(r.p, 0.05, epsilon = 1e-4);
        assert!(!r.mc_fallback);
        for t in [0.1, 1.0, 2.5, 6.0] {
            let r = pvalue_imhof(&d, t).unwrap();
            assert_abs_diff_eq!(r.p, chi1_tail(t), epsilon = 1e-6);
        }
    }

    #[test]
    fn imhof_equal_pair_matches_exponential() {
        // λ = (c, c) sums two chi-square(1)s: c·χ²₂, upper tail e^{−t/(2c)}.
        let d = GchisqDist::new(vec![1.0, 1.0]).unwrap();
        let r = pvalue_imhof(&d, 2.0).unwrap();
        assert_abs_diff_eq!(r.p, (-1.0f64).exp(), epsilon = 1e-6);
        let c = 3.7;
        let d = GchisqDist::new(vec![c, c]).unwrap();
        let r = pvalue_imhof(&d, 5.0).unwrap();
        assert_abs_diff_eq!(r.p, (-5.0 / (2.0 * c)).exp(), epsilon = 1e-6);
    }

    #[test]
    fn imhof_is_positively_homogeneous() {
        let base = vec![2.3, 1.1, 0.7, 0.05];
        let t = 5.0;
        let p0 = pvalue_imhof(&GchisqDist::new(base.clone()).unwrap(), t).unwrap().p;
        for c in [1e-3, 1e3] {
            let scaled: Vec<f64> = base.iter().map(|l| l * c).collect();
            let p = pvalue_imhof(&GchisqDist::new(scaled).unwrap(), t * c).unwrap().p;
            assert_abs_diff_eq!(p, p0, epsilon = 1e-8);
        }
    }

    #[test]
    fn imhof_nonincreasing_in_t() {
        let d = GchisqDist::new(vec![1.5, 0.5, 0.25]).unwrap();
        let mut last = 1.0 + 1e-9;
        for i in 0..30 {
            let t = 0.3 * i as f64;
            let p = pvalue_imhof(&d, t).unwrap().p;
            assert!(p <= last + 1e-9, "p({t}) = {p} rose above {last}");
            last = p;
        }
    }

    #[test]
    fn mc_matches_chi_square_and_is_deterministic() {
        let d = GchisqDist::new(vec![1.0]).unwrap();
        let p1 = pvalue_mc(&d, 3.841459, 200_000, 99).unwrap();
        let p2 = pvalue_mc(&d, 3.841459, 200_000, 99).unwrap();
        assert_eq!(p1, p2);
        // 3 binomial standard errors at N = 2e5 is about 0.0015.
        assert_abs_diff_eq!(p1, 0.05, epsilon = 0.002);
        assert_eq!(pvalue_mc(&d, 0.0, 2000, 1).unwrap(), 1.0);
        assert!(pvalue_mc(&d, 1.0, 999, 1).is_err());
    }

    #[test]
    fn mc_never_returns_zero() {
        let d = GchisqDist::new(vec![1.0]).unwrap();
        let p = pvalue_mc(&d, 1e9, 10_000, 5).unwrap();
        assert!(p > 0.0);
        assert_abs_diff_eq!(p, 1.0 / 10_001.0, epsilon = 1e-12);
    }

    #[test]
    fn moment_matches_imhof_where_exact() {
        let d = GchisqDist::new(vec![2.0]).unwrap();
        for t in [0.5, 2.0, 7.0] {
            let pm = pvalue_moment(&d, t).unwrap();
            let pi = pvalue_imhof(&d, t).unwrap().p;
            assert_abs_diff_eq!(pm, pi, epsilon = 1e-6);
        }
        let d = GchisqDist::new(vec![0.8, 0.8]).unwrap();
        for t in [0.5, 2.0, 5.0] {
            let pm = pvalue_moment(&d, t).unwrap();
            assert_abs_diff_eq!(pm, (-t / 1.6f64).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn moment_stays_near_imhof_on_skewed_weights() {
        let mut lambdas = vec![100.0];
        lambdas.extend(std::iter::repeat(1.0).take(9));
        let d = GchisqDist::new(lambdas).unwrap();
        let q = quantile(&d, 0.05).unwrap();
        let pm = pvalue_moment(&d, q).unwrap();
        assert!((pm - 0.05).abs() < 0.05, "moment p {pm} too far from 0.05");
    }

    #[test]
    fn quantile_hand_values() {
        let d = GchisqDist::new(vec![1.0]).unwrap();
        assert_abs_diff_eq!(quantile(&d, 0.05).unwrap(), 3.841459, epsilon = 1e-4);
        let d2 = GchisqDist::new(vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(quantile(&d2, (-1.0f64).exp()).unwrap(), 2.0, epsilon = 1e-5);
    }

    #[test]
    fn quantile_decreases_in_alpha() {
        let d = GchisqDist::new(vec![1.3, 0.4, 0.1]).unwrap();
        let q1 = quantile(&d, 0.01).unwrap();
        let q5 = quantile(&d, 0.05).unwrap();
        let q50 = quantile(&d, 0.5).unwrap();
        assert!(q1 > q5 && q5 > q50);
        assert_abs_diff_eq!(pvalue_imhof(&d, q5).unwrap().p, 0.05, epsilon = 1e-6);
    }

    #[test]
    fn imhof_tracks_mc_on_random_weights() {
        let mut rng = seed::rng(0xd15c);
        for _ in 0..5 {
            let dnum = rng.random_range(1..=8);
            let lambdas: Vec<f64> = (0..dnum).map(|_| rng.random_range(0.05..3.0)).collect();
            let dist = GchisqDist::new(lambdas).unwrap();
            let t: f64 = rng.random_range(0.5..8.0);
            let pi = pvalue_imhof(&dist, t).unwrap().p;
            let n = 100_000;
            let pmc = pvalue_mc(&dist, t, n, rng.random()).unwrap();
            let se = (pi.max(1e-12) * (1.0 - pi) / n as f64).sqrt();
            assert!(
                (pi - pmc).abs() < 3.0 * se + 1e-4,
                "imhof {pi} vs mc {pmc} (se {se})"
            );
        }
    }
}
