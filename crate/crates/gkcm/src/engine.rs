//! The conditional independence test engine.
//!
//! Both regressions are represented by n×n weight matrices W with
//! F̂(z_i) = Σ_j W_ij φ(x_j), so the centred residual Gram is
//! H(I−W)K(I−W)ᵀH without ever materializing feature vectors. The statistic
//! is T_n = n⁻¹ΣΣ (G_x ∘ G_y)_ij and its null distribution is the weighted
//! chi-square with weights equal to the kept eigenvalues of
//! (1/(n−1))·H(G_x ∘ G_y)H.

use ndarray::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::ContinuousCDF;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{self, ForestSpec, SplitInput, SplitMode};
use crate::kernels::{
    self, gram, median_heuristic_per_coord, median_heuristic_with, GramMatrix, KernelFamily,
    KernelSpec,
};
use crate::krr;
use crate::linalg;
use crate::nulldist::{self, GchisqDist};
use crate::seed;

/// Row-weighted combination of training outputs; the shared representation
/// for every regression backend.
#[derive(Clone, Debug)]
pub struct WeightMatrix {
    pub w: Array2<f64>,
    pub method: String,
}

impl WeightMatrix {
    /// No regression at all: residuals are the centred embeddings themselves.
    pub fn zeros(n: usize) -> Self {
        Self {
            w: Array2::zeros((n, n)),
            method: "none".into(),
        }
    }

    /// Perfect interpolation; forces the degenerate all-zero residual path.
    pub fn identity(n: usize) -> Self {
        Self {
            w: Array2::eye(n),
            method: "identity".into(),
        }
    }
}

/// Gram matrix of centred regression residuals in the output RKHS.
#[derive(Clone, Debug)]
pub struct ResidualGram {
    pub values: Array2<f64>,
}

/// (I−W) K (I−W)ᵀ, the residual Gram before mean-centring. The joint
/// embedding variant needs this uncentred form.
pub fn residual_gram_raw(output_gram: &GramMatrix, weights: &WeightMatrix) -> Result<Array2<f64>> {
    let n = output_gram.values.nrows();
    if weights.w.nrows() != n || weights.w.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight matrix is {}x{}, output gram is {n}x{n}",
            weights.w.nrows(),
            weights.w.ncols()
        )));
    }
    let mut a = -&weights.w;
    for i in 0..n {
        a[[i, i]] += 1.0;
    }
    let mut raw = a.dot(&output_gram.values).dot(&a.t());
    linalg::symmetrize(&mut raw);
    Ok(raw)
}

/// H(I−W) K (I−W)ᵀH: Gram of the residuals after subtracting their mean.
pub fn residual_gram(output_gram: &GramMatrix, weights: &WeightMatrix) -> Result<ResidualGram> {
    let raw = residual_gram_raw(output_gram, weights)?;
    Ok(ResidualGram {
        values: linalg::centered_both(&raw),
    })
}

/// T_n = n⁻¹ Σ_{i,j} (G_x)_ij (G_y)_ij, clamped at zero (the sum is a
/// quadratic form of a PSD Hadamard product, so negatives are round-off).
pub fn statistic(rg_x: &ResidualGram, rg_y: &ResidualGram) -> Result<f64> {
    let n = rg_x.values.nrows();
    if rg_y.values.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "residual grams disagree: {n} vs {}",
            rg_y.values.nrows()
        )));
    }
    let total = (&rg_x.values * &rg_y.values).sum();
    Ok((total / n as f64).max(0.0))
}

/// Kept eigenvalues of (1/(n−1))·H(G_x∘G_y)H: clamped at zero, truncated at
/// tolerance·λ_max, sorted descending. An all-zero product yields an empty
/// vector.
pub fn eigenvalues_t(
    rg_x: &ResidualGram,
    rg_y: &ResidualGram,
    tolerance: f64,
) -> Result<Array1<f64>> {
    let n = rg_x.values.nrows();
    if rg_y.values.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "residual grams disagree: {n} vs {}",
            rg_y.values.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { n, min: 2 });
    }
    let r = &rg_x.values * &rg_y.values;
    let mut t = linalg::centered_both(&r);
    t.mapv_inplace(|v| v / (n as f64 - 1.0));
    linalg::symmetrize(&mut t);
    let eigs = linalg::sym_eigvals(t)?;
    let lambda_max = eigs.iter().cloned().fold(0.0f64, f64::max);
    if lambda_max <= 0.0 {
        return Ok(Array1::zeros(0));
    }
    let cut = tolerance * lambda_max;
    let mut kept: Vec<f64> = eigs.iter().cloned().filter(|l| *l > cut).collect();
    kept.reverse();
    Ok(Array1::from(kept))
}

/// Appendix-style joint embedding: multiply the UNcentred X-residual Gram
/// entrywise by the Z-kernel Gram m'(z_i, z_j), then centre. m' is
/// cosine-normalized to a unit diagonal first when needed, so a constant
/// m' ≡ 1 reproduces the plain centred residual Gram exactly.
pub fn joint_embedding_adjust(
    raw_residual_gram_x: &Array2<f64>,
    z_gram: &GramMatrix,
) -> Result<ResidualGram> {
    let n = raw_residual_gram_x.nrows();
    if z_gram.values.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "z-kernel gram is {}x{}, residual gram is {n}x{n}",
            z_gram.values.nrows(),
            z_gram.values.ncols()
        )));
    }
    let m = &z_gram.values;
    let needs_norm = (0..n).any(|i| (m[[i, i]] - 1.0).abs() > 1e-12);
    let product = if needs_norm {
        if let Some(i) = (0..n).find(|&i| m[[i, i]] <= 0.0) {
            return Err(Error::DegenerateData(format!(
                "z-kernel gram has non-positive diagonal at {i}; cannot normalize"
            )));
        }
        let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / m[[i, i]].sqrt()).collect();
        Array2::from_shape_fn((n, n), |(i, j)| {
            raw_residual_gram_x[[i, j]] * m[[i, j]] * inv_sqrt[i] * inv_sqrt[j]
        })
    } else {
        raw_residual_gram_x * m
    };
    Ok(ResidualGram {
        values: linalg::centered_both(&product),
    })
}

/// Kernel on an observed block: either the median-heuristic Gaussian
/// (resolved against the data at test time) or a fully specified kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelChoice {
    MedianGaussian,
    Spec(KernelSpec),
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice::MedianGaussian
    }
}

impl Serialize for KernelChoice {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KernelChoice::MedianGaussian => ser.serialize_str("median_gaussian"),
            KernelChoice::Spec(spec) => spec.serialize(ser),
        }
    }
}

impl<'de> Deserialize<'de> for KernelChoice {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Spec(KernelSpec),
        }
        match Repr::deserialize(de)? {
            Repr::Name(s) if s == "median_gaussian" => Ok(KernelChoice::MedianGaussian),
            Repr::Name(s) => Err(D::Error::custom(format!(
                "unknown kernel name {s:?}; expected \"median_gaussian\" or a kernel spec"
            ))),
            Repr::Spec(spec) => Ok(KernelChoice::Spec(spec)),
        }
    }
}

/// Ridge penalty selection: a fixed value or leave-one-out tuning.
#[derive(Clone, Debug, PartialEq)]
pub enum KrrLambda {
    Fixed(f64),
    Loocv,
}

impl Serialize for KrrLambda {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KrrLambda::Fixed(v) => ser.serialize_f64(*v),
            KrrLambda::Loocv => ser.serialize_str("loocv"),
        }
    }
}

impl<'de> Deserialize<'de> for KrrLambda {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Name(String),
        }
        match Repr::deserialize(de)? {
            Repr::Num(v) => Ok(KrrLambda::Fixed(v)),
            Repr::Name(s) if s == "loocv" => Ok(KrrLambda::Loocv),
            Repr::Name(s) => Err(D::Error::custom(format!(
                "lambda must be a number or \"loocv\", got {s:?}"
            ))),
        }
    }
}

/// Regression backend for one side of the test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RegressorSpec {
    Krr {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<KrrLambda>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        input_kernel: Option<KernelSpec>,
    },
    Forest {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_trees: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mtry: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_node_size: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subsample_fraction: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        with_replacement: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        split_mode: Option<SplitMode>,
        #[serde(rename = "rff_D", default, skip_serializing_if = "Option::is_none")]
        rff_d: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        route_all_points: bool,
    },
    /// W = 0: no conditioning, reduces the statistic to n·HSIC(X, Y).
    None,
    /// W = I: perfect interpolation, the degenerate zero-residual path.
    Identity,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        RegressorSpec::Forest {
            num_trees: None,
            mtry: None,
            min_node_size: None,
            subsample_fraction: None,
            with_replacement: None,
            split_mode: None,
            rff_d: None,
            seed: None,
            route_all_points: false,
        }
    }
}

impl RegressorSpec {
    pub fn krr_default() -> Self {
        RegressorSpec::Krr {
            lambda: None,
            grid: None,
            input_kernel: None,
        }
    }

    pub fn krr_tuned() -> Self {
        RegressorSpec::Krr {
            lambda: Some(KrrLambda::Loocv),
            grid: None,
            input_kernel: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PvalueMethod {
    #[default]
    Imhof,
    Moment,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointEmbedding {
    #[serde(default)]
    pub z_kernel: KernelChoice,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_mc_samples() -> usize {
    100_000
}

fn default_eigen_tolerance() -> f64 {
    1e-12
}

/// Full test configuration; all fields have §-free defaults (Gaussian
/// median-heuristic kernels, forest regressions, Imhof p-values, α = 0.05).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    #[serde(default)]
    pub x_kernel: KernelChoice,
    #[serde(default)]
    pub y_kernel: KernelChoice,
    #[serde(default)]
    pub regressor_x: RegressorSpec,
    #[serde(default)]
    pub regressor_y: RegressorSpec,
    #[serde(default)]
    pub pvalue_method: PvalueMethod,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_embedding: Option<JointEmbedding>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eigen_tolerance")]
    pub eigen_tolerance: f64,
    /// Median heuristic on squared distances instead of distances.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub median_on_squared: bool,
    /// Per-coordinate median-heuristic lengthscales (tensor Gaussian).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub median_per_coordinate: bool,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            x_kernel: KernelChoice::default(),
            y_kernel: KernelChoice::default(),
            regressor_x: RegressorSpec::default(),
            regressor_y: RegressorSpec::default(),
            pvalue_method: PvalueMethod::default(),
            mc_samples: default_mc_samples(),
            alpha: default_alpha(),
            joint_embedding: None,
            seed: 0,
            eigen_tolerance: default_eigen_tolerance(),
            median_on_squared: false,
            median_per_coordinate: false,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if self.mc_samples < 1000 {
            return Err(Error::Config(format!(
                "mc_samples must be at least 1000, got {}",
                self.mc_samples
            )));
        }
        if !(self.eigen_tolerance >= 0.0 && self.eigen_tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "eigen_tolerance must be finite and >= 0, got {}",
                self.eigen_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestMetadata {
    pub method: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_kernel: Option<KernelSpec>,
    pub regressor_x: String,
    pub regressor_y: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loocv_lambda_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loocv_lambda_y: Option<f64>,
    pub pvalue_method: PvalueMethod,
    /// Set when the p-value came from moment matching (approximate by
    /// construction) or an Imhof quadrature fell back to Monte Carlo.
    pub approximate_pvalue: bool,
    pub mc_fallback: bool,
    pub eigenvalue_count: usize,
    pub joint_embedding: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub eigenvalues: Vec<f64>,
    pub metadata: TestMetadata,
}

fn resolve_kernel(choice: &KernelChoice, rows: ArrayView2<f64>, cfg: &TestConfig) -> Result<KernelSpec> {
    match choice {
        KernelChoice::Spec(spec) => {
            spec.validate()?;
            Ok(spec.clone())
        }
        KernelChoice::MedianGaussian => {
            if cfg.median_per_coordinate {
                Ok(KernelSpec::gaussian_tensor(median_heuristic_per_coord(
                    rows,
                    cfg.median_on_squared,
                )?))
            } else {
                Ok(KernelSpec::gaussian(median_heuristic_with(
                    rows,
                    cfg.median_on_squared,
                )?))
            }
        }
    }
}

struct ResolvedRegressor {
    weights: WeightMatrix,
    loocv_lambda: Option<f64>,
}

/// Fit one side's regression of the output embedding on z and return its
/// weight matrix. `side` salts all derived seeds so the two sides never share
/// randomness.
fn resolve_regressor(
    spec: &RegressorSpec,
    z: ArrayView2<f64>,
    output_rows: ArrayView2<f64>,
    output_gram: &GramMatrix,
    output_kernel: &KernelSpec,
    cfg: &TestConfig,
    side: &str,
) -> Result<ResolvedRegressor> {
    let n = z.nrows();
    match spec {
        RegressorSpec::None => Ok(ResolvedRegressor {
            weights: WeightMatrix::zeros(n),
            loocv_lambda: None,
        }),
        RegressorSpec::Identity => Ok(ResolvedRegressor {
            weights: WeightMatrix::identity(n),
            loocv_lambda: None,
        }),
        RegressorSpec::Krr {
            lambda,
            grid,
            input_kernel,
        } => {
            let input_spec = match input_kernel {
                Some(k) => {
                    k.validate()?;
                    k.clone()
                }
                None => KernelSpec::gaussian(median_heuristic_with(z, cfg.median_on_squared)?),
            };
            let mut chosen = None;
            let lambda = match lambda {
                None => krr::default_lambda(n),
                Some(KrrLambda::Fixed(v)) => *v,
                Some(KrrLambda::Loocv) => {
                    let grid_vals = match grid {
                        Some(g) => g.clone(),
                        None => krr::default_grid(n),
                    };
                    let seed_val =
                        seed::mix_str(cfg.seed, &format!("loocv_{side}"));
                    let (best, _) =
                        krr::loocv_lambda(z, output_gram, &input_spec, &grid_vals, seed_val)?;
                    chosen = Some(best);
                    best
                }
            };
            let model = krr::krr_fit(z, &input_spec, lambda)?;
            Ok(ResolvedRegressor {
                weights: krr::krr_weight_matrix(&model),
                loocv_lambda: chosen,
            })
        }
        RegressorSpec::Forest {
            num_trees,
            mtry,
            min_node_size,
            subsample_fraction,
            with_replacement,
            split_mode,
            rff_d,
            seed: forest_seed,
            route_all_points,
        } => {
            let d = z.ncols();
            let base_seed = forest_seed
                .unwrap_or_else(|| seed::mix_str(cfg.seed, &format!("forest_{side}")));
            let mut fspec = ForestSpec::defaults(d, base_seed);
            if let Some(v) = num_trees {
                fspec.num_trees = *v;
            }
            if let Some(v) = mtry {
                fspec.mtry = *v;
            }
            if let Some(v) = min_node_size {
                fspec.min_node_size = *v;
            }
            if let Some(v) = subsample_fraction {
                fspec.subsample_fraction = *v;
            }
            if let Some(v) = with_replacement {
                fspec.with_replacement = *v;
            }
            if let Some(v) = split_mode {
                fspec.split_mode = *v;
            }
            fspec.rff_d = *rff_d;
            fspec.route_all_points = *route_all_points;

            let forest = match fspec.split_mode {
                SplitMode::ExactKernel => {
                    forest::fit_forest(z, SplitInput::Gram(output_gram), &fspec)?
                }
                SplitMode::Rff => {
                    let sigma = match (&output_kernel.family, output_kernel.lengthscales.as_slice())
                    {
                        (KernelFamily::Gaussian, [s]) => *s,
                        _ => {
                            return Err(Error::Config(
                                "rff split mode needs a single-lengthscale gaussian output kernel"
                                    .into(),
                            ))
                        }
                    };
                    let dfeat = fspec.rff_d.unwrap_or(100);
                    let rff_spec = KernelSpec::rff_gaussian(
                        sigma,
                        dfeat,
                        seed::mix_str(base_seed, "rff"),
                    );
                    let feats = kernels::rff_features(&rff_spec, output_rows)?;
                    forest::fit_forest(z, SplitInput::Features(&feats), &fspec)?
                }
            };
            Ok(ResolvedRegressor {
                weights: forest::forest_weight_matrix(&forest, z)?,
                loocv_lambda: None,
            })
        }
    }
}

fn pvalue_from_eigenvalues(
    eigenvalues: &Array1<f64>,
    t: f64,
    cfg: &TestConfig,
) -> Result<(f64, bool, bool)> {
    if eigenvalues.is_empty() {
        return Ok((1.0, false, false));
    }
    let dist = GchisqDist::new(eigenvalues.to_vec())?;
    match cfg.pvalue_method {
        PvalueMethod::Imhof => {
            let r = nulldist::pvalue_imhof(&dist, t)?;
            Ok((r.p, r.mc_fallback, r.mc_fallback))
        }
        PvalueMethod::Moment => Ok((nulldist::pvalue_moment(&dist, t)?, true, false)),
        PvalueMethod::Mc => {
            let p = nulldist::pvalue_mc(
                &dist,
                t,
                cfg.mc_samples,
                seed::mix_str(cfg.seed, "mc_pvalue"),
            )?;
            Ok((p, false, false))
        }
    }
}

/// End-to-end kernel conditional independence test: output Grams on X and Y,
/// two weight-matrix regressions on Z, centred residual Grams, the statistic,
/// eigenvalue extraction, and the tail probability. Deterministic given the
/// config seed.
pub fn gkcm_test(data: &Dataset, config: &TestConfig) -> Result<TestResult> {
    config.validate()?;
    let n = data.n();
    if n < 10 {
        return Err(Error::TooFewSamples { n, min: 10 });
    }
    let x_kernel = resolve_kernel(&config.x_kernel, data.x.view(), config)?;
    let y_kernel = resolve_kernel(&config.y_kernel, data.y.view(), config)?;
    let k = gram(&x_kernel, data.x.view())?;
    let l = gram(&y_kernel, data.y.view())?;

    let rx = resolve_regressor(
        &config.regressor_x,
        data.z.view(),
        data.x.view(),
        &k,
        &x_kernel,
        config,
        "x",
    )?;
    let ry = resolve_regressor(
        &config.regressor_y,
        data.z.view(),
        data.y.view(),
        &l,
        &y_kernel,
        config,
        "y",
    )?;

    let rg_x = match &config.joint_embedding {
        None => residual_gram(&k, &rx.weights)?,
        Some(je) => {
            let z_kernel = resolve_kernel(&je.z_kernel, data.z.view(), config)?;
            let m = gram(&z_kernel, data.z.view())?;
            let raw = residual_gram_raw(&k, &rx.weights)?;
            joint_embedding_adjust(&raw, &m)?
        }
    };
    let rg_y = residual_gram(&l, &ry.weights)?;

    let t_n = statistic(&rg_x, &rg_y)?;
    let eigenvalues = eigenvalues_t(&rg_x, &rg_y, config.eigen_tolerance)?;
    let (p_value, approximate, mc_fallback) = pvalue_from_eigenvalues(&eigenvalues, t_n, config)?;

    Ok(TestResult {
        statistic: t_n,
        p_value,
        reject: p_value < config.alpha,
        alpha: config.alpha,
        eigenvalues: eigenvalues.to_vec(),
        metadata: TestMetadata {
            method: "gkcm".into(),
            n,
            x_kernel: Some(x_kernel),
            y_kernel: Some(y_kernel),
            regressor_x: rx.weights.method.clone(),
            regressor_y: ry.weights.method.clone(),
            loocv_lambda_x: rx.loocv_lambda,
            loocv_lambda_y: ry.loocv_lambda,
            pvalue_method: config.pvalue_method,
            approximate_pvalue: approximate,
            mc_fallback,
            eigenvalue_count: eigenvalues.len(),
            joint_embedding: config.joint_embedding.is_some(),
            seed: config.seed,
        },
    })
}

/// Signed scalar statistic and two-sided normal p-value from paired residual
/// vectors: T = √n·mean(r·s)/sd(r·s) with the n-denominator deviation.
pub fn gcm_statistic(r: ArrayView1<f64>, s: ArrayView1<f64>) -> Result<(f64, f64)> {
    let n = r.len();
    if s.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "residual vectors disagree: {n} vs {}",
            s.len()
        )));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { n, min: 2 });
    }
    let prod: Vec<f64> = r.iter().zip(s.iter()).map(|(a, b)| a * b).collect();
    let mean = prod.iter().sum::<f64>() / n as f64;
    let var = prod.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return Err(Error::DegenerateResiduals);
    }
    let t = (n as f64).sqrt() * mean / var.sqrt();
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
    let p = (2.0 * normal.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok((t, p))
}

/// Scalar conditional covariance baseline: residuals r = (I−W_x)x,
/// s = (I−W_y)y from the configured regressions, then the normal-tail test.
/// Forest regressions grow on the linear (CART) output Gram of the target.
pub fn gcm_test(data: &Dataset, config: &TestConfig) -> Result<TestResult> {
    config.validate()?;
    let n = data.n();
    if n < 10 {
        return Err(Error::TooFewSamples { n, min: 10 });
    }
    if data.x.ncols() != 1 || data.y.ncols() != 1 {
        return Err(Error::Config(format!(
            "scalar covariance baseline needs 1-column x and y, got {} and {}",
            data.x.ncols(),
            data.y.ncols()
        )));
    }
    let linear = KernelSpec::linear();
    let kx = gram(&linear, data.x.view())?;
    let ky = gram(&linear, data.y.view())?;
    let rx = resolve_regressor(
        &config.regressor_x,
        data.z.view(),
        data.x.view(),
        &kx,
        &linear,
        config,
        "x",
    )?;
    let ry = resolve_regressor(
        &config.regressor_y,
        data.z.view(),
        data.y.view(),
        &ky,
        &linear,
        config,
        "y",
    )?;
    let x = data.x.column(0);
    let y = data.y.column(0);
    let r = &x - &rx.weights.w.dot(&x);
    let s = &y - &ry.weights.w.dot(&y);
    let (t, p_value) = gcm_statistic(r.view(), s.view())?;

    Ok(TestResult {
        statistic: t,
        p_value,
        reject: p_value < config.alpha,
        alpha: config.alpha,
        eigenvalues: Vec::new(),
        metadata: TestMetadata {
            method: "gcm".into(),
            n,
            x_kernel: None,
            y_kernel: None,
            regressor_x: rx.weights.method.clone(),
            regressor_y: ry.weights.method.clone(),
            loocv_lambda_x: rx.loocv_lambda,
            loocv_lambda_y: ry.loocv_lambda,
            pvalue_method: config.pvalue_method,
            approximate_pvalue: false,
            mc_fallback: false,
            eigenvalue_count: 0,
            joint_embedding: false,
            seed: config.seed,
        },
    })
}
