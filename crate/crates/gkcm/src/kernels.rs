//! Kernel families, Gram matrices, median-heuristic bandwidths, and random
//! Fourier features.
//!
//! Lengthscale convention: a Gaussian kernel with lengthscale σ is
//! exp(−‖a−b‖²/(2σ²)), and the median heuristic returns σ = the median
//! pairwise Euclidean distance. The alternative convention (σ² = median of
//! squared distances) is available through the `on_squared` switch.

use ndarray::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    GaussianTensor,
    Linear,
    Dirac,
    RffGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RffParams {
    #[serde(rename = "D")]
    pub d: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lengthscales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rff: Option<RffParams>,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            lengthscales: vec![sigma],
            rff: None,
        }
    }

    pub fn gaussian_tensor(sigmas: Vec<f64>) -> Self {
        Self {
            family: KernelFamily::GaussianTensor,
            lengthscales: sigmas,
            rff: None,
        }
    }

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            lengthscales: vec![],
            rff: None,
        }
    }

    pub fn dirac() -> Self {
        Self {
            family: KernelFamily::Dirac,
            lengthscales: vec![],
            rff: None,
        }
    }

    pub fn rff_gaussian(sigma: f64, num_features: usize, seed: u64) -> Self {
        Self {
            family: KernelFamily::RffGaussian,
            lengthscales: vec![sigma],
            rff: Some(RffParams {
                d: num_features,
                seed,
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("lengthscales must be positive and finite".into()));
        }
        match self.family {
            KernelFamily::Gaussian => {
                if self.lengthscales.len() != 1 {
                    return Err(Error::Config("gaussian kernel takes exactly one lengthscale".into()));
                }
            }
            KernelFamily::GaussianTensor => {
                if self.lengthscales.is_empty() {
                    return Err(Error::Config("gaussian_tensor kernel needs per-coordinate lengthscales".into()));
                }
            }
            KernelFamily::Linear | KernelFamily::Dirac => {
                if !self.lengthscales.is_empty() {
                    return Err(Error::Config("linear/dirac kernels take no lengthscale".into()));
                }
            }
            KernelFamily::RffGaussian => {
                if self.lengthscales.len() != 1 {
                    return Err(Error::Config("rff_gaussian kernel takes exactly one lengthscale".into()));
                }
                match &self.rff {
                    Some(p) if p.d >= 1 => {}
                    _ => return Err(Error::Config("rff_gaussian needs rff parameters with D >= 1".into())),
                }
            }
        }
        Ok(())
    }

    /// sup_x k(x,x) when the family is bounded.
    pub fn kappa(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian | KernelFamily::GaussianTensor | KernelFamily::Dirac => Some(1.0),
            KernelFamily::RffGaussian => Some(2.0),
            KernelFamily::Linear => None,
        }
    }
}

/// Dense symmetric PSD matrix of pairwise kernel values, with provenance.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub values: Array2<f64>,
    pub spec: KernelSpec,
}

fn check_dims(spec: &KernelSpec, dim: usize) -> Result<()> {
    if spec.family == KernelFamily::GaussianTensor && spec.lengthscales.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "gaussian_tensor has {} lengthscales but the data has {} columns",
            spec.lengthscales.len(),
            dim
        )));
    }
    Ok(())
}

pub fn kernel_eval(spec: &KernelSpec, a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    spec.validate()?;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "kernel arguments have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_dims(spec, a.len())?;
    Ok(match spec.family {
        KernelFamily::Gaussian => {
            let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
            (-sq / (2.0 * spec.lengthscales[0].powi(2))).exp()
        }
        KernelFamily::GaussianTensor => {
            let e: f64 = a
                .iter()
                .zip(b.iter())
                .zip(&spec.lengthscales)
                .map(|((x, y), s)| (x - y).powi(2) / (2.0 * s * s))
                .sum();
            (-e).exp()
        }
        KernelFamily::Linear => a.dot(&b),
        KernelFamily::Dirac => {
            let eq = a
                .iter()
                .zip(b.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            if eq {
                1.0
            } else {
                0.0
            }
        }
        KernelFamily::RffGaussian => {
            let mut two = Array2::zeros((2, a.len()));
            two.row_mut(0).assign(&a);
            two.row_mut(1).assign(&b);
            let f = rff_features(spec, two.view())?;
            f.row(0).dot(&f.row(1))
        }
    })
}

/// Pairwise kernel matrix over the rows. Symmetric by construction.
pub fn gram(spec: &KernelSpec, rows: ArrayView2<f64>) -> Result<GramMatrix> {
    spec.validate()?;
    check_dims(spec, rows.ncols())?;
    let n = rows.nrows();
    if n == 0 {
        return Err(Error::DegenerateData("gram of zero rows".into()));
    }
    let values = match spec.family {
        KernelFamily::Linear => rows.dot(&rows.t()),
        KernelFamily::RffGaussian => {
            let f = rff_features(spec, rows)?;
            f.dot(&f.t())
        }
        KernelFamily::Gaussian => {
            let inv = 1.0 / (2.0 * spec.lengthscales[0].powi(2));
            let mut m = Array2::zeros((n, n));
            for i in 0..n {
                m[[i, i]] = 1.0;
                for j in (i + 1)..n {
                    let sq: f64 = rows
                        .row(i)
                        .iter()
                        .zip(rows.row(j).iter())
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    let v = (-sq * inv).exp();
                    m[[i, j]] = v;
                    m[[j, i]] = v;
                }
            }
            m
        }
        KernelFamily::GaussianTensor => {
            let invs: Vec<f64> = spec.lengthscales.iter().map(|s| 1.0 / (2.0 * s * s)).collect();
            let mut m = Array2::zeros((n, n));
            for i in 0..n {
                m[[i, i]] = 1.0;
                for j in (i + 1)..n {
                    let e: f64 = rows
                        .row(i)
                        .iter()
                        .zip(rows.row(j).iter())
                        .zip(&invs)
                        .map(|((a, b), w)| (a - b).powi(2) * w)
                        .sum();
                    let v = (-e).exp();
                    m[[i, j]] = v;
                    m[[j, i]] = v;
                }
            }
            m
        }
        KernelFamily::Dirac => {
            let mut m = Array2::zeros((n, n));
            for i in 0..n {
                m[[i, i]] = 1.0;
                for j in (i + 1)..n {
                    let eq = rows
                        .row(i)
                        .iter()
                        .zip(rows.row(j).iter())
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                    let v = if eq { 1.0 } else { 0.0 };
                    m[[i, j]] = v;
                    m[[j, i]] = v;
                }
            }
            m
        }
    };
    Ok(GramMatrix {
        values,
        spec: spec.clone(),
    })
}

const MEDIAN_SUBSAMPLE_LIMIT: usize = 2000;
const MEDIAN_SUBSAMPLE_SEED: u64 = 0x6d65_6468; // heuristic quantity, fixed seed

/// Median pairwise Euclidean distance over distinct index pairs. Rows beyond
/// 2000 are reduced to a fixed-seed subsample of 2000 before the O(n²) pass.
pub fn median_heuristic(rows: ArrayView2<f64>) -> Result<f64> {
    median_heuristic_with(rows, false)
}

/// `on_squared` switches to σ = sqrt(median of squared distances).
pub fn median_heuristic_with(rows: ArrayView2<f64>, on_squared: bool) -> Result<f64> {
    let n = rows.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { n, min: 2 });
    }
    let idx = subsample_indices(n);
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, i) in idx.iter().enumerate() {
        for j in &idx[(a + 1)..] {
            let sq: f64 = rows
                .row(*i)
                .iter()
                .zip(rows.row(*j).iter())
                .map(|(x, y)| (x - y).powi(2))
                .sum();
            dists.push(if on_squared { sq } else { sq.sqrt() });
        }
    }
    let med = median_in_place(&mut dists);
    let sigma = if on_squared { med.sqrt() } else { med };
    if sigma <= 0.0 {
        return Err(Error::DegenerateData(
            "median pairwise distance is zero (rows effectively identical)".into(),
        ));
    }
    Ok(sigma)
}

/// Per-coordinate median heuristic for the tensor kernel: σ_j from the
/// 1-D distances of column j.
pub fn median_heuristic_per_coord(rows: ArrayView2<f64>, on_squared: bool) -> Result<Vec<f64>> {
    (0..rows.ncols())
        .map(|j| {
            let col = rows.column(j).insert_axis(Axis(1));
            median_heuristic_with(col.view(), on_squared)
        })
        .collect()
}

fn subsample_indices(n: usize) -> Vec<usize> {
    if n <= MEDIAN_SUBSAMPLE_LIMIT {
        return (0..n).collect();
    }
    let mut rng = seed::rng(MEDIAN_SUBSAMPLE_SEED);
    let mut idx: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first LIMIT entries are a uniform subsample.
    for i in 0..MEDIAN_SUBSAMPLE_LIMIT {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(MEDIAN_SUBSAMPLE_LIMIT);
    idx.sort_unstable();
    idx
}

fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Explicit random Fourier features: row(x) = √(2/D)·cos(ω_k·x + b_k), with
/// ω_k ~ N(0, σ⁻²I) and b_k ~ U[0, 2π) drawn from the spec seed (ω first,
/// then offsets), so features are deterministic given the spec.
pub fn rff_features(spec: &KernelSpec, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
    spec.validate()?;
    let params = match (spec.family, &spec.rff) {
        (KernelFamily::RffGaussian, Some(p)) => *p,
        _ => {
            return Err(Error::Config(
                "rff_features requires an rff_gaussian kernel spec".into(),
            ))
        }
    };
    let sigma = spec.lengthscales[0];
    let dim = rows.ncols();
    let mut rng = seed::rng(params.seed);
    let normal = Normal::new(0.0, 1.0 / sigma).expect("positive sd");
    let mut omega = Array2::zeros((params.d, dim));
    for k in 0..params.d {
        for j in 0..dim {
            omega[[k, j]] = normal.sample(&mut rng);
        }
    }
    let mut offsets = Array1::zeros(params.d);
    for k in 0..params.d {
        offsets[k] = rng.random_range(0.0..std::f64::consts::TAU);
    }
    let mut feats = rows.dot(&omega.t());
    let scale = (2.0 / params.d as f64).sqrt();
    for mut row in feats.rows_mut() {
        for (v, b) in row.iter_mut().zip(offsets.iter()) {
            *v = scale * (*v + b).cos();
        }
    }
    Ok(feats)
}
