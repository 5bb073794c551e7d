//! Scenario generators and the rejection-rate campaign runner.
//!
//! Seven fixed scenarios (four null, three alternative) draw Z from N(0, I₇)
//! with scalar X and Y; the `zhang` family builds post-nonlinear cascades
//! over d conditioning variables with an optional latent common cause. The
//! campaign runner evaluates every method on the same dataset per repetition,
//! aggregates rejection counts with Wilson intervals, and checkpoints each
//! (scenario, n, method) cell so interrupted campaigns resume cheaply.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::prelude::*;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::data::{self, Dataset};
use crate::engine::{self, TestConfig};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZhangCase {
    #[serde(rename = "I")]
    One,
    #[serde(rename = "II")]
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZhangHypothesis {
    Null,
    Alt,
}

fn default_true() -> bool {
    true
}

/// Data-generating process identifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum Scenario {
    Null1,
    Null2,
    Null3,
    Null4,
    Alt1,
    Alt2,
    Alt3,
    Zhang {
        case: ZhangCase,
        hypothesis: ZhangHypothesis,
        d: usize,
        /// Share Z columns and error draws across d for the same seed, so
        /// the d+1 dataset extends the d dataset instead of redrawing it.
        #[serde(default = "default_true")]
        incremental: bool,
    },
}

impl Scenario {
    pub fn is_null(&self) -> bool {
        matches!(
            self,
            Scenario::Null1
                | Scenario::Null2
                | Scenario::Null3
                | Scenario::Null4
                | Scenario::Zhang {
                    hypothesis: ZhangHypothesis::Null,
                    ..
                }
        )
    }

    /// Stable label used in seeds, checkpoint keys, and report rows.
    pub fn tag(&self) -> String {
        match self {
            Scenario::Null1 => "null1".into(),
            Scenario::Null2 => "null2".into(),
            Scenario::Null3 => "null3".into(),
            Scenario::Null4 => "null4".into(),
            Scenario::Alt1 => "alt1".into(),
            Scenario::Alt2 => "alt2".into(),
            Scenario::Alt3 => "alt3".into(),
            Scenario::Zhang {
                case,
                hypothesis,
                d,
                incremental,
            } => {
                let case = match case {
                    ZhangCase::One => "I",
                    ZhangCase::Two => "II",
                };
                let hyp = match hypothesis {
                    ZhangHypothesis::Null => "null",
                    ZhangHypothesis::Alt => "alt",
                };
                let suffix = if *incremental { "" } else { "_indep" };
                format!("zhang_case{case}_{hyp}_d{d}{suffix}")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Scenario::Zhang { d, .. } = self {
            if *d == 0 {
                return Err(Error::Config(
                    "zhang scenarios need at least one conditioning variable".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Draws one dataset. Deterministic given (scenario, n, seed); the seven
/// fixed scenarios expose all 7 Z columns regardless of how many the
/// formulas touch.
pub fn generate(scenario: &Scenario, n: usize, seed_val: u64) -> Result<Dataset> {
    scenario.validate()?;
    match scenario {
        Scenario::Zhang {
            case,
            hypothesis,
            d,
            incremental,
        } => generate_zhang(*case, *hypothesis, *d, *incremental, n, seed_val),
        fixed => generate_fixed(fixed, n, seed_val),
    }
}

fn generate_fixed(scenario: &Scenario, n: usize, seed_val: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed::mix_str(seed_val, &scenario.tag()));
    let normal = StandardNormal;
    let mut x = Array2::zeros((n, 1));
    let mut y = Array2::zeros((n, 1));
    let mut z = Array2::zeros((n, 7));
    let tau = std::f64::consts::TAU;
    for i in 0..n {
        let zv: [f64; 7] = std::array::from_fn(|_| normal.sample(&mut rng));
        let ex: f64 = normal.sample(&mut rng);
        let ey: f64 = normal.sample(&mut rng);
        let (z1, z2, z3, z4, z5, z6, z7) = (zv[0], zv[1], zv[2], zv[3], zv[4], zv[5], zv[6]);
        let (xi, yi) = match scenario {
            Scenario::Null1 => (
                0.4 * z1 + 0.5 * z2 + 0.6 * z3 - 0.7 * z4 + z7 + ex,
                0.6 * z1 - 0.2 * z2 + 0.3 * z4 + 0.9 * z5 - 0.5 * z6 + ey,
            ),
            Scenario::Null2 => (
                0.5 * z1 - 0.9 * z2 + 0.4 * z3 * z3 + z4 * z5 * ex,
                -0.8 * z4 + z5 * z5 + z6.exp() + (tau * z7).sin() * ey,
            ),
            Scenario::Null3 => (
                (0.5 * z1 - 0.9 * z2 + z3 + ex).tanh(),
                (-0.8 * z4 * z5 + 0.6 * z6 * z7 + ey).exp(),
            ),
            Scenario::Null4 => ((tau * z1).sin() + 0.1 * ex, (tau * z1).sin() + ey),
            Scenario::Alt1 => {
                let xi = 0.7 * z1 + z2 + ex;
                (xi, 0.4 * z3 - 0.2 * z4 - 0.1 * xi + ey)
            }
            Scenario::Alt2 => {
                let xi = z1.sin() + ex;
                (xi, z2.tanh() + 0.4 * xi * xi * z3 + ey)
            }
            Scenario::Alt3 => {
                let xi = 0.2 * z2.powi(3) + z4.tanh() + ex;
                (
                    xi,
                    (std::f64::consts::PI * z1).sin() - 0.4 * z2 * z2
                        + (0.2 * std::f64::consts::PI * xi).cos() * ey,
                )
            }
            Scenario::Zhang { .. } => unreachable!("handled by generate"),
        };
        x[[i, 0]] = xi;
        y[[i, 0]] = yi;
        for (j, v) in zv.iter().enumerate() {
            z[[i, j]] = *v;
        }
    }
    Dataset::new(x, y, z)
}

fn zhang_phi(u: f64) -> f64 {
    u + u.powi(3) / 3.0 + 0.5 * (u / 3.0).tanh()
}

fn zhang_psi(v: f64) -> f64 {
    v + (v / 3.0).tanh()
}

fn zhang_h(u: f64) -> f64 {
    0.5 * u + 0.7 * u.tanh()
}

fn generate_zhang(
    case: ZhangCase,
    hypothesis: ZhangHypothesis,
    d: usize,
    incremental: bool,
    n: usize,
    seed_val: u64,
) -> Result<Dataset> {
    let normal = StandardNormal;
    let mut z: Array2<f64> = Array2::zeros((n, d));
    let mut ex: Array1<f64> = Array1::zeros(n);
    let mut ey: Array1<f64> = Array1::zeros(n);
    let mut c: Array1<f64> = Array1::zeros(n);
    if incremental {
        // Column streams keyed by the covariate index only: the dataset for
        // d+1 conditioning variables extends the one for d.
        for j in 0..d {
            let mut rng = seed::rng(seed::mix(seed::mix_str(seed_val, "zhang_z"), j as u64));
            for i in 0..n {
                z[[i, j]] = normal.sample(&mut rng);
            }
        }
        let mut rng = seed::rng(seed::mix_str(seed_val, "zhang_ex"));
        for v in ex.iter_mut() {
            *v = normal.sample(&mut rng);
        }
        let mut rng = seed::rng(seed::mix_str(seed_val, "zhang_ey"));
        for v in ey.iter_mut() {
            *v = normal.sample(&mut rng);
        }
        let mut rng = seed::rng(seed::mix_str(seed_val, "zhang_c"));
        let half_normal = Normal::new(0.0, 0.5).expect("valid sd");
        for v in c.iter_mut() {
            *v = half_normal.sample(&mut rng);
        }
    } else {
        let mut rng = seed::rng(seed::mix_str(seed_val, &format!("zhang_indep_d{d}")));
        let half_normal = Normal::new(0.0, 0.5).expect("valid sd");
        for i in 0..n {
            for j in 0..d {
                z[[i, j]] = normal.sample(&mut rng);
            }
            ex[i] = normal.sample(&mut rng);
            ey[i] = normal.sample(&mut rng);
            c[i] = half_normal.sample(&mut rng);
        }
    }

    let mut x = Array2::zeros((n, 1));
    let mut y = Array2::zeros((n, 1));
    for i in 0..n {
        let z1 = z[[i, 0]];
        let mut f = 0.7 * (z1.powi(3) / 5.0 + z1 / 2.0);
        let mut g = (z1.powi(3) / 4.0 + z1) / 3.0;
        if case == ZhangCase::Two {
            for j in 2..=d {
                let (a, b) = if j == 2 { (0.5, 1.0) } else { (2.0 / 3.0, 5.0 / 6.0) };
                let zj = z[[i, j - 1]];
                f = zhang_h(a * f + b * zj);
                g = zhang_h(a * g + b * zj);
            }
        }
        x[[i, 0]] = zhang_phi(f + ex[i].tanh());
        y[[i, 0]] = zhang_psi(g + ey[i]);
    }

    match hypothesis {
        ZhangHypothesis::Null => Dataset::new(x, y, z),
        ZhangHypothesis::Alt => {
            // Standardize each block, then add the latent common cause to
            // both X and Y.
            let mut xs = data::standardize(&x)?;
            let mut ys = data::standardize(&y)?;
            let zs = data::standardize(&z)?;
            for i in 0..n {
                xs[[i, 0]] += c[i];
                ys[[i, 0]] += c[i];
            }
            Dataset::new(xs, ys, zs)
        }
    }
}

/// A test procedure the campaign runner can evaluate: maps a dataset and a
/// derived seed to a p-value.
pub trait TestMethod: Sync {
    fn name(&self) -> &str;
    fn run(&self, data: &Dataset, seed_val: u64) -> Result<f64>;
    /// Folded into checkpoint keys; distinguishes differently configured
    /// methods sharing a code path.
    fn fingerprint(&self) -> u64 {
        seed::fnv1a(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    #[default]
    Gkcm,
    Gcm,
}

/// A named engine configuration usable as a campaign method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfiguredMethod {
    pub name: String,
    #[serde(default)]
    pub kind: MethodKind,
    #[serde(default)]
    pub config: TestConfig,
}

impl TestMethod for ConfiguredMethod {
    fn name(&self) -> &str {
        &self.name
    }

    fn run(&self, data: &Dataset, seed_val: u64) -> Result<f64> {
        let mut config = self.config.clone();
        config.seed = seed_val;
        let result = match self.kind {
            MethodKind::Gkcm => engine::gkcm_test(data, &config)?,
            MethodKind::Gcm => engine::gcm_test(data, &config)?,
        };
        Ok(result.p_value)
    }

    fn fingerprint(&self) -> u64 {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        seed::mix(
            seed::fnv1a(&self.name),
            seed::fnv1a(&format!("{:?}|{config}", self.kind)),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub scenarios: Vec<Scenario>,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Record wall-clock per test; off yields byte-identical reports across
    /// runs and parallelism settings.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

fn default_alpha() -> f64 {
    0.05
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("campaign needs at least one repetition".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if self.scenarios.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::Config(
                "campaign needs at least one scenario and one sample size".into(),
            ));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        Ok(())
    }
}

/// One (scenario, n, method) aggregate with its per-rep p-values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignCell {
    pub scenario: String,
    pub n: usize,
    pub method: String,
    pub k: usize,
    pub reps: usize,
    pub rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_runtime_ms: f64,
    pub failures: usize,
    /// One entry per rep; `null` where the method errored.
    pub p_values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignTable {
    pub alpha: f64,
    pub seed: u64,
    pub cells: Vec<CampaignCell>,
}

impl CampaignTable {
    /// Deterministic CSV report; floats print in shortest round-trip form.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario",
            "n",
            "method",
            "k",
            "N",
            "rate",
            "wilson_lo",
            "wilson_hi",
            "mean_runtime_ms",
            "failures",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.scenario.clone(),
                c.n.to_string(),
                c.method.clone(),
                c.k.to_string(),
                c.reps.to_string(),
                format!("{}", c.rate),
                format!("{}", c.wilson_lo),
                format!("{}", c.wilson_hi),
                format!("{}", c.mean_runtime_ms),
                c.failures.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Wilson score interval for k successes in n trials.
pub fn wilson_ci(k: usize, n: usize, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::Config(format!(
            "wilson interval needs 0 <= k <= n with n >= 1, got k={k}, n={n}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!(
            "confidence must lie in (0,1), got {confidence}"
        )));
    }
    // The 95% z-score is pinned to its correctly rounded value: the generic
    // path runs through ln(), whose last-ulp result depends on which variant
    // the host libm dispatches, and campaign reports must be byte-identical
    // across processes and hosts.
    let z = if confidence == 0.95 {
        1.959_963_984_540_054_3
    } else {
        statrs::distribution::Normal::new(0.0, 1.0)
            .expect("unit normal")
            .inverse_cdf(0.5 * (1.0 + confidence))
    };
    let nf = n as f64;
    let phat = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (phat + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // The closed form hits the boundaries exactly at k = 0 and k = n; keep
    // them free of round-off residue.
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

fn rep_seed(campaign_seed: u64, tag: &str, n: usize, rep: usize) -> u64 {
    seed::mix(
        seed::mix(seed::mix_str(campaign_seed, tag), n as u64),
        rep as u64,
    )
}

fn cell_key(cfg: &CampaignConfig, tag: &str, n: usize, method: &dyn TestMethod) -> u64 {
    let mut key = seed::mix_str(cfg.seed, tag);
    key = seed::mix(key, n as u64);
    key = seed::mix(key, cfg.reps as u64);
    key = seed::mix(key, cfg.alpha.to_bits());
    seed::mix(key, method.fingerprint())
}

fn checkpoint_path(dir: &Path, key: u64) -> std::path::PathBuf {
    dir.join(format!("{key:016x}.json"))
}

fn load_checkpoint(
    dir: &Path,
    key: u64,
    tag: &str,
    n: usize,
    method: &str,
    reps: usize,
) -> Option<CampaignCell> {
    let text = fs::read_to_string(checkpoint_path(dir, key)).ok()?;
    let cell: CampaignCell = serde_json::from_str(&text).ok()?;
    (cell.scenario == tag && cell.n == n && cell.method == method && cell.reps == reps)
        .then_some(cell)
}

/// Serialize to a sibling temp file, then rename into place.
fn store_checkpoint(dir: &Path, key: u64, cell: &CampaignCell) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(serde_json::to_string_pretty(cell).expect("cell serializes").as_bytes())?;
    tmp.persist(checkpoint_path(dir, key))
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Runs every method on the same dataset per repetition, for each
/// (scenario, n) cell. Seeds derive from (campaign seed, scenario tag, n,
/// rep), so results are independent of scheduling and of which other cells
/// run. With `checkpoint_dir` set, finished cells are persisted and reused.
pub fn run_campaign(
    methods: &[&dyn TestMethod],
    cfg: &CampaignConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<CampaignTable> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::Config("campaign needs at least one method".into()));
    }
    for (i, a) in methods.iter().enumerate() {
        for b in &methods[i + 1..] {
            if a.name() == b.name() {
                return Err(Error::Config(format!(
                    "duplicate method name {:?} in campaign",
                    a.name()
                )));
            }
        }
    }

    let mut cells = Vec::new();
    for scenario in &cfg.scenarios {
        let tag = scenario.tag();
        for &n in &cfg.sample_sizes {
            let mut ready: Vec<Option<CampaignCell>> = vec![None; methods.len()];
            if let Some(dir) = checkpoint_dir {
                for (mi, method) in methods.iter().enumerate() {
                    let key = cell_key(cfg, &tag, n, *method);
                    ready[mi] = load_checkpoint(dir, key, &tag, n, method.name(), cfg.reps);
                }
            }
            let missing: Vec<usize> = (0..methods.len()).filter(|i| ready[*i].is_none()).collect();
            if !missing.is_empty() {
                let per_rep: Vec<Vec<(Option<f64>, f64)>> = (0..cfg.reps)
                    .into_par_iter()
                    .map(|rep| {
                        let rs = rep_seed(cfg.seed, &tag, n, rep);
                        let data = generate(scenario, n, seed::mix_str(rs, "data"));
                        missing
                            .iter()
                            .map(|&mi| {
                                let method = methods[mi];
                                let start = Instant::now();
                                let p = data.as_ref().ok().and_then(|d| {
                                    method
                                        .run(d, seed::mix(rs, seed::fnv1a(method.name())))
                                        .ok()
                                });
                                let ms = start.elapsed().as_secs_f64() * 1e3;
                                (p, ms)
                            })
                            .collect()
                    })
                    .collect();
                for (slot, &mi) in missing.iter().enumerate() {
                    let method = methods[mi];
                    let p_values: Vec<Option<f64>> =
                        per_rep.iter().map(|reps| reps[slot].0).collect();
                    let k = p_values
                        .iter()
                        .filter(|p| matches!(p, Some(v) if *v < cfg.alpha))
                        .count();
                    let failures = p_values.iter().filter(|p| p.is_none()).count();
                    let mean_runtime_ms = if cfg.record_timing {
                        per_rep.iter().map(|reps| reps[slot].1).sum::<f64>() / cfg.reps as f64
                    } else {
                        0.0
                    };
                    let attempted = cfg.reps;
                    let (wilson_lo, wilson_hi) = wilson_ci(k, attempted, 0.95)?;
                    let cell = CampaignCell {
                        scenario: tag.clone(),
                        n,
                        method: method.name().to_string(),
                        k,
                        reps: attempted,
                        rate: k as f64 / attempted as f64,
                        wilson_lo,
                        wilson_hi,
                        mean_runtime_ms,
                        failures,
                        p_values,
                    };
                    if let Some(dir) = checkpoint_dir {
                        store_checkpoint(dir, cell_key(cfg, &tag, n, method), &cell)?;
                    }
                    ready[mi] = Some(cell);
                }
            }
            for cell in ready.into_iter() {
                let mut cell = cell.expect("every method resolved");
                if !cfg.record_timing {
                    cell.mean_runtime_ms = 0.0;
                }
                cells.push(cell);
            }
        }
    }
    Ok(CampaignTable {
        alpha: cfg.alpha,
        seed: cfg.seed,
        cells,
    })
}
