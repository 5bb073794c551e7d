//! RKHS-valued kernel ridge regression.
//!
//! The conditional mean embedding estimate is F̂(z) = Σ_i w_i(z) φ(x_i) with
//! w(z) = (M + nλI)⁻¹ m(z), where M is the input-kernel Gram on the training
//! z's and m(z) the kernel vector of a query against them. The output
//! embedding never appears in the weights, so one fitted model serves any
//! output kernel; the in-sample weight matrix W = M(M + nλI)⁻¹ is what the
//! test engine consumes.

use ndarray::prelude::*;

use crate::engine::WeightMatrix;
use crate::error::{Error, Result};
use crate::kernels::{gram, kernel_eval, GramMatrix, KernelSpec};
use crate::linalg;
use crate::seed;

#[derive(Debug, Clone)]
pub struct KrrModel {
    pub z_train: Array2<f64>,
    pub input_spec: KernelSpec,
    pub lambda: f64,
    /// Input Gram M.
    m: Array2<f64>,
    /// (M + nλI)⁻¹.
    inv: Array2<f64>,
    /// True when the SPD solve needed the floored-eigenvalue fallback.
    pub used_eigen_fallback: bool,
}

/// The untuned default ridge, λ = 10⁻³/n.
pub fn default_lambda(n: usize) -> f64 {
    1e-3 / n as f64
}

/// The leave-one-out tuning grid, {10^g/n : g = −5..3}.
pub fn default_grid(n: usize) -> Vec<f64> {
    (-5..=3).map(|g| 10f64.powi(g) / n as f64).collect()
}

pub fn krr_fit(z: ArrayView2<f64>, input_spec: &KernelSpec, lambda: f64) -> Result<KrrModel> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!("ridge lambda must be positive, got {lambda}")));
    }
    let n = z.nrows();
    if n == 0 {
        return Err(Error::TooFewSamples { n, min: 1 });
    }
    let m = gram(input_spec, z)?.values;
    let ridge = n as f64 * lambda;
    let mut sys = m.clone();
    for i in 0..n {
        sys[[i, i]] += ridge;
    }
    let (inv, used_eigen_fallback) = linalg::spd_inverse(&sys)?;
    Ok(KrrModel {
        z_train: z.to_owned(),
        input_spec: input_spec.clone(),
        lambda,
        m,
        inv,
        used_eigen_fallback,
    })
}

/// w(z) = (M + nλI)⁻¹ m(z).
pub fn krr_weights(model: &KrrModel, z_query: ArrayView1<f64>) -> Result<Array1<f64>> {
    if z_query.len() != model.z_train.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "query has {} coordinates, training data has {}",
            z_query.len(),
            model.z_train.ncols()
        )));
    }
    let n = model.z_train.nrows();
    let mut m_vec = Array1::zeros(n);
    for i in 0..n {
        m_vec[i] = kernel_eval(&model.input_spec, z_query, model.z_train.row(i))?;
    }
    Ok(model.inv.dot(&m_vec))
}

/// In-sample hat matrix W = M(M + nλI)⁻¹; symmetric with eigenvalues
/// μ_k/(μ_k + nλ) ∈ [0, 1).
pub fn krr_weight_matrix(model: &KrrModel) -> WeightMatrix {
    let mut w = model.m.dot(&model.inv);
    linalg::symmetrize(&mut w);
    WeightMatrix {
        w,
        method: format!("krr(lambda={:.6e})", model.lambda),
    }
}

/// Per-grid-point leave-one-out score; `None` marks a numerically singular
/// point that was skipped.
#[derive(Debug, Clone)]
pub struct LooScore {
    pub lambda: f64,
    pub score: Option<f64>,
}

/// Leave-one-out selection of λ over a grid, scored without refitting via the
/// hat-matrix identity: with H = M(M+nλI)⁻¹ and A = I − H, the LOO residual
/// squared norms are (A K Aᵀ)_ii/(1 − H_ii)², and the score is their sum.
/// Ties pick the smallest λ. Samples beyond 1000 rows are reduced to the
/// first 1000 after a seeded shuffle.
pub fn loocv_lambda(
    z: ArrayView2<f64>,
    output_gram: &GramMatrix,
    input_spec: &KernelSpec,
    grid: &[f64],
    seed_val: u64,
) -> Result<(f64, Vec<LooScore>)> {
    if grid.is_empty() {
        return Err(Error::Config("empty leave-one-out grid".into()));
    }
    let n = z.nrows();
    if output_gram.values.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "output gram is {}x{} but z has {} rows",
            output_gram.values.nrows(),
            output_gram.values.ncols(),
            n
        )));
    }

    const LOOCV_MAX: usize = 1000;
    let (z_sub, k_sub);
    if n > LOOCV_MAX {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = seed::rng(seed::mix_str(seed_val, "loocv_subsample"));
        for i in (1..n).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            idx.swap(i, j);
        }
        idx.truncate(LOOCV_MAX);
        z_sub = z.select(Axis(0), &idx);
        let mut k = Array2::zeros((LOOCV_MAX, LOOCV_MAX));
        for (r, &ir) in idx.iter().enumerate() {
            for (c, &ic) in idx.iter().enumerate() {
                k[[r, c]] = output_gram.values[[ir, ic]];
            }
        }
        k_sub = k;
    } else {
        z_sub = z.to_owned();
        k_sub = output_gram.values.clone();
    }

    let n_sub = z_sub.nrows();
    let m = gram(input_spec, z_sub.view())?.values;
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None; // (lambda, score)
    for &lambda in grid {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!("grid lambda must be positive, got {lambda}")));
        }
        let ridge = n_sub as f64 * lambda;
        let mut sys = m.clone();
        for i in 0..n_sub {
            sys[[i, i]] += ridge;
        }
        let (inv, _) = linalg::spd_inverse(&sys)?;
        let h = m.dot(&inv);
        let singular = (0..n_sub).any(|i| 1.0 - h[[i, i]] <= 1e-12);
        if singular {
            scores.push(LooScore { lambda, score: None });
            continue;
        }
        // a = I − H; diag(A K Aᵀ)_i = Σ_j (AK)_ij A_ij.
        let mut a = -h;
        for i in 0..n_sub {
            a[[i, i]] += 1.0;
        }
        let ak = a.dot(&k_sub);
        let mut score = 0.0;
        for i in 0..n_sub {
            let raw: f64 = ak.row(i).dot(&a.row(i));
            let denom = a[[i, i]]; // 1 − H_ii
            score += raw / (denom * denom);
        }
        scores.push(LooScore {
            lambda,
            score: Some(score),
        });
        let better = match best {
            None => true,
            Some((bl, bs)) => score < bs || (score == bs && lambda < bl),
        };
        if better {
            best = Some((lambda, score));
        }
    }
    match best {
        Some((lambda, _)) => Ok((lambda, scores)),
        None => Err(Error::LoocvAllSkipped),
    }
}
