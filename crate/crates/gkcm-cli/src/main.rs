//! `gkcm`: kernel conditional independence testing from the command line.
//!
//! Subcommands: `test` runs one test on a CSV file and prints JSON, `simulate`
//! draws a synthetic benchmark dataset, `bench` runs a rejection-rate campaign
//! described by a JSON config, and `tune` reports leave-one-out ridge
//! selection for both regressions.
//!
//! stdout carries machine-readable payloads only (JSON or CSV); diagnostics go
//! to stderr. Exit codes: 0 success (whether or not the test rejects),
//! 1 runtime failure, 2 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gkcm::data::{load_csv, save_csv, ColumnSelector, Dataset};
use gkcm::engine::{
    gcm_test, gkcm_test, JointEmbedding, KernelChoice, PvalueMethod, RegressorSpec, TestConfig,
};
use gkcm::kernels::{gram, median_heuristic_with, KernelSpec};
use gkcm::krr::default_grid;
use gkcm::seed;
use gkcm::simbench::{
    generate, run_campaign, CampaignConfig, ConfiguredMethod, MethodKind, Scenario, TestMethod,
    ZhangCase, ZhangHypothesis,
};

enum CliError {
    Usage(String),
    Runtime(String),
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<gkcm::Error> for CliError {
    fn from(e: gkcm::Error) -> Self {
        match e {
            gkcm::Error::Selector(_) | gkcm::Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "gkcm", version, about = "Kernel conditional independence testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether X is independent of Y given Z in a CSV file
    Test(TestArgs),
    /// Draw a synthetic benchmark dataset and write it as CSV
    Simulate(SimulateArgs),
    /// Run a rejection-rate campaign described by a JSON config
    Bench(BenchArgs),
    /// Report leave-one-out ridge selection for both regressions
    Tune(TuneArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV file (header row optional)
    #[arg(long)]
    data: PathBuf,
    /// X columns: comma-separated names, 0-based indices, or a-b index ranges
    #[arg(long)]
    x_cols: String,
    /// Y columns, same syntax
    #[arg(long)]
    y_cols: String,
    /// Conditioning columns, same syntax
    #[arg(long)]
    z_cols: String,
    /// Full test configuration as a JSON file
    #[arg(long, conflicts_with = "method")]
    config: Option<PathBuf>,
    /// Named preset
    #[arg(long, value_enum, default_value_t = MethodPreset::GkcmRf)]
    method: MethodPreset,
    /// Rejection level override
    #[arg(long)]
    alpha: Option<f64>,
    /// Seed override for all derived randomness
    #[arg(long)]
    seed: Option<u64>,
    /// Null-distribution evaluation override
    #[arg(long, value_enum)]
    pvalue: Option<PvalueArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodPreset {
    /// Random-forest regressions with exact-kernel splits
    GkcmRf,
    /// Kernel ridge regressions at the default penalty
    GkcmKrr,
    /// Kernel ridge with leave-one-out penalty selection
    GkcmKrrTuned,
    /// Kernel ridge plus the conditioning-set embedding adjustment
    GkcmJoint,
    /// Scalar generalised covariance baseline
    Gcm,
}

#[derive(Clone, Copy, ValueEnum)]
enum PvalueArg {
    /// Numerical inversion of the characteristic function
    Imhof,
    /// Two-moment gamma approximation
    Moment,
    /// Monte Carlo draws from the eigenvalue mixture
    Mc,
}

impl From<PvalueArg> for PvalueMethod {
    fn from(v: PvalueArg) -> Self {
        match v {
            PvalueArg::Imhof => PvalueMethod::Imhof,
            PvalueArg::Moment => PvalueMethod::Moment,
            PvalueArg::Mc => PvalueMethod::Mc,
        }
    }
}

fn preset(method: MethodPreset) -> (MethodKind, TestConfig) {
    let mut config = TestConfig::default();
    let kind = match method {
        MethodPreset::GkcmRf => MethodKind::Gkcm,
        MethodPreset::GkcmKrr => {
            config.regressor_x = RegressorSpec::krr_default();
            config.regressor_y = RegressorSpec::krr_default();
            MethodKind::Gkcm
        }
        MethodPreset::GkcmKrrTuned => {
            config.regressor_x = RegressorSpec::krr_tuned();
            config.regressor_y = RegressorSpec::krr_tuned();
            MethodKind::Gkcm
        }
        MethodPreset::GkcmJoint => {
            config.regressor_x = RegressorSpec::krr_default();
            config.regressor_y = RegressorSpec::krr_default();
            config.joint_embedding = Some(JointEmbedding {
                z_kernel: KernelChoice::MedianGaussian,
            });
            MethodKind::Gkcm
        }
        MethodPreset::Gcm => MethodKind::Gcm,
    };
    (kind, config)
}

/// Reads and deserializes a JSON file; parse failures are usage errors that
/// name the file and the offending line/column.
fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("cannot parse {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))
}

fn cmd_test(args: &TestArgs) -> CliResult<()> {
    let x_cols = ColumnSelector::parse(&args.x_cols)?;
    let y_cols = ColumnSelector::parse(&args.y_cols)?;
    let z_cols = ColumnSelector::parse(&args.z_cols)?;
    let (kind, mut config) = match &args.config {
        Some(path) => (MethodKind::Gkcm, read_json::<TestConfig>(path)?),
        None => preset(args.method),
    };
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if let Some(seed_val) = args.seed {
        config.seed = seed_val;
    }
    if let Some(pv) = args.pvalue {
        config.pvalue_method = pv.into();
    }
    let data = load_csv(&args.data, &x_cols, &y_cols, &z_cols)?;
    let result = match kind {
        MethodKind::Gkcm => gkcm_test(&data, &config)?,
        MethodKind::Gcm => gcm_test(&data, &config)?,
    };
    println!("{}", to_json(&result)?);
    Ok(())
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario family
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Sample size (rows)
    #[arg(long)]
    n: usize,
    /// Seed for the draw
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Chain variant, required with --scenario zhang
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    /// Data-generating regime, required with --scenario zhang
    #[arg(long, value_enum)]
    hypothesis: Option<HypothesisArg>,
    /// Conditioning dimension, required with --scenario zhang
    #[arg(long)]
    d: Option<usize>,
    /// Redraw every column when d changes instead of extending shared streams
    #[arg(long)]
    independent_streams: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ScenarioArg {
    Null1,
    Null2,
    Null3,
    Null4,
    Alt1,
    Alt2,
    Alt3,
    Zhang,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    #[value(name = "I")]
    One,
    #[value(name = "II")]
    Two,
}

#[derive(Clone, Copy, ValueEnum)]
enum HypothesisArg {
    Null,
    Alt,
}

fn build_scenario(args: &SimulateArgs) -> CliResult<Scenario> {
    if args.scenario != ScenarioArg::Zhang {
        if args.case.is_some()
            || args.hypothesis.is_some()
            || args.d.is_some()
            || args.independent_streams
        {
            return Err(usage(
                "--case, --hypothesis, --d, and --independent-streams apply only to --scenario zhang",
            ));
        }
        return Ok(match args.scenario {
            ScenarioArg::Null1 => Scenario::Null1,
            ScenarioArg::Null2 => Scenario::Null2,
            ScenarioArg::Null3 => Scenario::Null3,
            ScenarioArg::Null4 => Scenario::Null4,
            ScenarioArg::Alt1 => Scenario::Alt1,
            ScenarioArg::Alt2 => Scenario::Alt2,
            ScenarioArg::Alt3 => Scenario::Alt3,
            ScenarioArg::Zhang => unreachable!(),
        });
    }
    let case = match args
        .case
        .ok_or_else(|| usage("--scenario zhang requires --case"))?
    {
        CaseArg::One => ZhangCase::One,
        CaseArg::Two => ZhangCase::Two,
    };
    let hypothesis = match args
        .hypothesis
        .ok_or_else(|| usage("--scenario zhang requires --hypothesis"))?
    {
        HypothesisArg::Null => ZhangHypothesis::Null,
        HypothesisArg::Alt => ZhangHypothesis::Alt,
    };
    let d = args.d.ok_or_else(|| usage("--scenario zhang requires --d"))?;
    Ok(Scenario::Zhang {
        case,
        hypothesis,
        d,
        incremental: !args.independent_streams,
    })
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    if args.n < 2 {
        return Err(usage(format!("--n must be at least 2, got {}", args.n)));
    }
    let scenario = build_scenario(args)?;
    let data = generate(&scenario, args.n, args.seed)?;
    save_csv(&data, &args.out)?;

    #[derive(Serialize)]
    struct Summary {
        path: String,
        scenario: String,
        rows: usize,
        x_cols: usize,
        y_cols: usize,
        z_cols: usize,
    }
    let summary = Summary {
        path: args.out.display().to_string(),
        scenario: scenario.tag(),
        rows: data.n(),
        x_cols: data.x.ncols(),
        y_cols: data.y.ncols(),
        z_cols: data.z.ncols(),
    };
    println!("{}", to_json(&summary)?);
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    /// Campaign JSON: scenarios, sample_sizes, reps, alpha, seed,
    /// record_timing, and a methods array of named test configurations
    #[arg(long)]
    config: PathBuf,
    /// Directory for campaign.csv, campaign.json, and checkpoints/
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads (default: GKCM_JOBS if set, else all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Reuse finished cells checkpointed by a previous run
    #[arg(long)]
    resume: bool,
    /// Zero the runtime column so reports are byte-identical across runs
    #[arg(long)]
    no_timing: bool,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

/// On-disk campaign description: the evaluation grid plus the methods.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    scenarios: Vec<Scenario>,
    sample_sizes: Vec<usize>,
    reps: usize,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_true")]
    record_timing: bool,
    methods: Vec<ConfiguredMethod>,
}

/// --jobs beats GKCM_JOBS; with neither, rayon sizes the pool itself.
fn resolve_jobs(flag: Option<usize>) -> CliResult<Option<usize>> {
    let jobs = match flag {
        Some(j) => Some(j),
        None => match std::env::var("GKCM_JOBS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                usage(format!("GKCM_JOBS must be a positive integer, got {v:?}"))
            })?),
            Err(std::env::VarError::NotPresent) => None,
            Err(e) => return Err(usage(format!("cannot read GKCM_JOBS: {e}"))),
        },
    };
    if jobs == Some(0) {
        return Err(usage("worker thread count must be at least 1"));
    }
    Ok(jobs)
}

/// Writes via a sibling temp file and a rename, so readers never observe a
/// partially written report.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .map_err(|e| CliError::Runtime(format!("cannot persist {}: {}", path.display(), e.error)))?;
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let file: BenchFile = read_json(&args.config)?;
    if file.methods.is_empty() {
        return Err(usage(format!("{} lists no methods", args.config.display())));
    }
    if let Some(jobs) = resolve_jobs(args.jobs)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot size the thread pool: {e}")))?;
    }
    let cfg = CampaignConfig {
        scenarios: file.scenarios,
        sample_sizes: file.sample_sizes,
        reps: file.reps,
        alpha: file.alpha,
        seed: file.seed,
        record_timing: file.record_timing && !args.no_timing,
    };
    fs::create_dir_all(&args.out_dir)?;
    let checkpoints = args.out_dir.join("checkpoints");
    if !args.resume && checkpoints.exists() {
        fs::remove_dir_all(&checkpoints)?;
    }

    let methods: Vec<&dyn TestMethod> =
        file.methods.iter().map(|m| m as &dyn TestMethod).collect();
    let table = run_campaign(&methods, &cfg, Some(&checkpoints))?;

    let csv_text = table.to_csv()?;
    let json_text = to_json(&table)?;
    write_atomic(&args.out_dir.join("campaign.csv"), csv_text.as_bytes())?;
    write_atomic(&args.out_dir.join("campaign.json"), json_text.as_bytes())?;
    eprintln!(
        "wrote campaign.csv and campaign.json under {} ({} cells)",
        args.out_dir.display(),
        table.cells.len()
    );
    print!("{csv_text}");
    Ok(())
}

#[derive(Args)]
struct TuneArgs {
    /// Input CSV file (header row optional)
    #[arg(long)]
    data: PathBuf,
    /// X columns: comma-separated names, 0-based indices, or a-b index ranges
    #[arg(long)]
    x_cols: String,
    /// Y columns, same syntax
    #[arg(long)]
    y_cols: String,
    /// Conditioning columns, same syntax
    #[arg(long)]
    z_cols: String,
    /// Seed; matches the selection inside `test --method gkcm-krr-tuned`
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated ridge grid; default 10^g/n for g in -5..=3
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Serialize)]
struct TuneScore {
    lambda: f64,
    /// Leave-one-out residual norm sum; null where the solve was singular.
    score: Option<f64>,
}

#[derive(Serialize)]
struct TuneSide {
    output_kernel: KernelSpec,
    selected_lambda: f64,
    scores: Vec<TuneScore>,
}

#[derive(Serialize)]
struct TuneReport {
    n: usize,
    input_kernel: KernelSpec,
    grid: Vec<f64>,
    x: TuneSide,
    y: TuneSide,
}

enum Side {
    X,
    Y,
}

fn tune_side(
    data: &Dataset,
    side: Side,
    input_kernel: &KernelSpec,
    grid: &[f64],
    seed_val: u64,
) -> CliResult<TuneSide> {
    let rows = match side {
        Side::X => data.x.view(),
        Side::Y => data.y.view(),
    };
    let output_kernel = KernelSpec::gaussian(median_heuristic_with(rows, false)?);
    let output_gram = gram(&output_kernel, rows)?;
    let (selected_lambda, scores) =
        gkcm::krr::loocv_lambda(data.z.view(), &output_gram, input_kernel, grid, seed_val)?;
    Ok(TuneSide {
        output_kernel,
        selected_lambda,
        scores: scores
            .into_iter()
            .map(|s| TuneScore {
                lambda: s.lambda,
                score: s.score,
            })
            .collect(),
    })
}

fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let grid: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| usage(format!("cannot parse ridge grid value {s:?}")))
        })
        .collect::<CliResult<_>>()?;
    if grid.is_empty() {
        return Err(usage("--grid lists no values"));
    }
    Ok(grid)
}

fn cmd_tune(args: &TuneArgs) -> CliResult<()> {
    let x_cols = ColumnSelector::parse(&args.x_cols)?;
    let y_cols = ColumnSelector::parse(&args.y_cols)?;
    let z_cols = ColumnSelector::parse(&args.z_cols)?;
    let data = load_csv(&args.data, &x_cols, &y_cols, &z_cols)?;
    let grid = match &args.grid {
        Some(text) => parse_grid(text)?,
        None => default_grid(data.n()),
    };
    let input_kernel = KernelSpec::gaussian(median_heuristic_with(data.z.view(), false)?);
    let x = tune_side(
        &data,
        Side::X,
        &input_kernel,
        &grid,
        seed::mix_str(args.seed, "loocv_x"),
    )?;
    let y = tune_side(
        &data,
        Side::Y,
        &input_kernel,
        &grid,
        seed::mix_str(args.seed, "loocv_y"),
    )?;
    let report = TuneReport {
        n: data.n(),
        input_kernel,
        grid,
        x,
        y,
    };
    println!("{}", to_json(&report)?);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Tune(args) => cmd_tune(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
