//! Independent oracles for the integration and acceptance tests.
//!
//! Everything in here recomputes quantities from first principles (explicit
//! refits, brute-force enumeration, explicit feature vectors) so the library
//! implementations are checked against genuinely different code paths.

#![allow(dead_code)]

use ndarray::prelude::*;
use ndarray_linalg::SolveC;
use rand_distr::{Distribution, Normal};

use gkcm::kernels::{gram, KernelSpec};

pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = gkcm::seed::rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    Array2::from_shape_fn((rows, cols), |_| normal.sample(&mut rng))
}

// ---------------------------------------------------------------------------
// Kernel ridge regression: leave-one-out by explicit refits.
// ---------------------------------------------------------------------------

/// LOO score Σ_i ‖φ(x_i) − F̂^{(−i)}(z_i)‖² where each F̂^{(−i)} is refit from
/// scratch on the n−1 remaining points, keeping the absolute ridge nλ of the
/// full fit. `k_out` is the output-embedding Gram k(x_i, x_j).
pub fn loo_refit_score(
    z: &Array2<f64>,
    k_out: &Array2<f64>,
    input_spec: &KernelSpec,
    lambda: f64,
) -> f64 {
    let n = z.nrows();
    let m_full = gram(input_spec, z.view()).unwrap().values;
    let ridge = n as f64 * lambda;
    let mut score = 0.0;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|j| *j != i).collect();
        let mut a = Array2::zeros((n - 1, n - 1));
        for (r, &jr) in keep.iter().enumerate() {
            for (c, &jc) in keep.iter().enumerate() {
                a[[r, c]] = m_full[[jr, jc]];
            }
            a[[r, r]] += ridge;
        }
        let rhs = Array1::from_iter(keep.iter().map(|&j| m_full[[i, j]]));
        let w = a.solvec(&rhs).expect("ridge system is SPD");
        // ‖φ(x_i) − Σ_j w_j φ(x_j)‖² expanded in Gram entries.
        let mut cross = 0.0;
        let mut quad = 0.0;
        for (r, &jr) in keep.iter().enumerate() {
            cross += w[r] * k_out[[i, jr]];
            for (c, &jc) in keep.iter().enumerate() {
                quad += w[r] * w[c] * k_out[[jr, jc]];
            }
        }
        score += k_out[[i, i]] - 2.0 * cross + quad;
    }
    score
}

// ---------------------------------------------------------------------------
// Forest splits: brute-force enumeration with the documented tie-break.
// ---------------------------------------------------------------------------

/// Embedding variance of the index set by the direct double sum.
pub fn brute_variance(k: &Array2<f64>, s: &[usize]) -> f64 {
    let m = s.len() as f64;
    let diag: f64 = s.iter().map(|&i| k[[i, i]]).sum();
    let mut block = 0.0;
    for &i in s {
        for &j in s {
            block += k[[i, j]];
        }
    }
    diag / m - block / (m * m)
}

/// Enumerates every (candidate feature, midpoint) pair and returns the
/// maximiser of Var(S) − (|L|/|S|)Var(L) − (|R|/|S|)Var(R), with ties broken
/// by lowest feature index then lowest threshold. `min_child` restricts to
/// splits leaving both children at least that large.
pub fn brute_best_split(
    k: &Array2<f64>,
    s: &[usize],
    z: &Array2<f64>,
    candidate_features: &[usize],
    min_child: usize,
) -> Option<(usize, f64, f64)> {
    let parent = brute_variance(k, s);
    let m = s.len() as f64;
    let mut feats: Vec<usize> = candidate_features.to_vec();
    feats.sort_unstable();
    let mut best: Option<(usize, f64, f64)> = None;
    for &j in &feats {
        let mut vals: Vec<f64> = s.iter().map(|&i| z[[i, j]]).collect();
        vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for pair in vals.windows(2) {
            let t = 0.5 * (pair[0] + pair[1]);
            let left: Vec<usize> = s.iter().copied().filter(|&i| z[[i, j]] <= t).collect();
            let right: Vec<usize> = s.iter().copied().filter(|&i| z[[i, j]] > t).collect();
            if left.len() < min_child || right.len() < min_child {
                continue;
            }
            let red = parent
                - (left.len() as f64 / m) * brute_variance(k, &left)
                - (right.len() as f64 / m) * brute_variance(k, &right);
            let better = match &best {
                None => true,
                Some((_, _, best_red)) => red > *best_red,
            };
            if better {
                best = Some((j, t, red));
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Test statistic: explicit finite-dimensional feature computation.
// ---------------------------------------------------------------------------

/// n·‖Ĉ‖²_F with Ĉ = (1/n) Σ_i ε_i ξ_iᵀ built from explicit residual feature
/// vectors ε_i = centred (Φx − W_x Φx) rows, likewise ξ.
pub fn explicit_statistic(
    feat_x: &Array2<f64>,
    feat_y: &Array2<f64>,
    w_x: &Array2<f64>,
    w_y: &Array2<f64>,
) -> f64 {
    let eps = centred_residual_features(feat_x, w_x);
    let xi = centred_residual_features(feat_y, w_y);
    let n = feat_x.nrows() as f64;
    let p = eps.ncols();
    let q = xi.ncols();
    let mut c = Array2::<f64>::zeros((p, q));
    for i in 0..feat_x.nrows() {
        for a in 0..p {
            for b in 0..q {
                c[[a, b]] += eps[[i, a]] * xi[[i, b]];
            }
        }
    }
    c.mapv_inplace(|v| v / n);
    n * c.iter().map(|v| v * v).sum::<f64>()
}

/// Rows are φ(x_i) − Σ_j W_ij φ(x_j), then the column mean is subtracted.
pub fn centred_residual_features(feat: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
    let mut resid = feat - &w.dot(feat);
    let means = resid.mean_axis(Axis(0)).unwrap();
    for mut row in resid.rows_mut() {
        row -= &means;
    }
    resid
}

/// Degree-2 polynomial feature map for a row: all products x_a·x_b laid out
/// as a flattened outer product, so ⟨f(u), f(v)⟩ = (u·v)².
pub fn poly2_features(rows: &Array2<f64>) -> Array2<f64> {
    let (n, d) = rows.dim();
    let mut out = Array2::zeros((n, d * d));
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                out[[i, a * d + b]] = rows[[i, a]] * rows[[i, b]];
            }
        }
    }
    out
}

/// Gram of the degree-2 polynomial kernel (u·v)², built entrywise.
pub fn poly2_gram(rows: &Array2<f64>) -> Array2<f64> {
    let n = rows.nrows();
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let ip = rows.row(i).dot(&rows.row(j));
            g[[i, j]] = ip * ip;
        }
    }
    g
}

// ---------------------------------------------------------------------------
// HSIC: independently coded biased estimator (expanded form, no centering
// matrix).
// ---------------------------------------------------------------------------

pub fn biased_hsic(k: &Array2<f64>, l: &Array2<f64>) -> f64 {
    let n = k.nrows();
    let nf = n as f64;
    let mut sum_kl = 0.0;
    let mut sum_k = 0.0;
    let mut sum_l = 0.0;
    let mut row_k = vec![0.0; n];
    let mut row_l = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            sum_kl += k[[i, j]] * l[[i, j]];
            sum_k += k[[i, j]];
            sum_l += l[[i, j]];
            row_k[i] += k[[i, j]];
            row_l[i] += l[[i, j]];
        }
    }
    let cross: f64 = (0..n).map(|i| row_k[i] * row_l[i]).sum();
    sum_kl / nf.powi(2) + sum_k * sum_l / nf.powi(4) - 2.0 * cross / nf.powi(3)
}

// ---------------------------------------------------------------------------
// Joint embedding: explicit tensor features.
// ---------------------------------------------------------------------------

/// Centred Gram of the tensor features t_i = u_i ⊗ ψ_i, where u_i are raw
/// (uncentred) residual feature rows and ψ_i explicit Z-embedding rows.
pub fn tensor_adjusted_gram(u: &Array2<f64>, psi: &Array2<f64>) -> Array2<f64> {
    let n = u.nrows();
    let (p, r) = (u.ncols(), psi.ncols());
    let mut t = Array2::zeros((n, p * r));
    for i in 0..n {
        for a in 0..p {
            for b in 0..r {
                t[[i, a * r + b]] = u[[i, a]] * psi[[i, b]];
            }
        }
    }
    let means = t.mean_axis(Axis(0)).unwrap();
    for mut row in t.rows_mut() {
        row -= &means;
    }
    t.dot(&t.t())
}

// ---------------------------------------------------------------------------
// Closed-form tails for the null distribution checks.
// ---------------------------------------------------------------------------

pub fn chisq1_upper_tail(t: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(1.0).unwrap().sf(t)
}

/// P(c·χ²_{2} ≥ t) = exp(−t/(2c)): the equal-pair (c, c) closed form.
pub fn equal_pair_upper_tail(c: f64, t: f64) -> f64 {
    (-t / (2.0 * c)).exp()
}
