//! Command-line front end: `fit`, `cv`, `simulate` and `score`.
//!
//! Every command reads an optional JSON config, applies flag overrides, writes
//! `manifest.json` into the output directory and then its result files. All
//! files are written to a temporary name and renamed into place. Errors are
//! reported on stderr as one JSON object; the exit code is 2 for invalid
//! input, 3 for numerical failures and 4 for non-convergence.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::coxph::{fit_coxph, CoxFit};
use crate::dataset::{Standardization, SurvivalDataset};
use crate::error::{Error, Result};
use crate::inference::{curves_with_intervals, normal_quantile, CurveEstimate, PointwiseIntervals};
use crate::model_selection::{cross_validate, DEFAULT_CANDIDATES};
use crate::optimizer::{fit, FitConfig, FittedModel, Variant};
use crate::reporting::{coverage_rows, metrics_rows, summary_from_rows, write_rows};
use crate::simulation::{replicate, score, CovarianceStructure, KSelection, Scenario, StudyConfig, StudyResult};

#[derive(Debug, Parser)]
#[command(name = "sttv", version, about = "Cox models with sparse time-varying effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a CSV file and write curves.csv and model.json.
    Fit(FitArgs),
    /// Choose K by cross-validation and write cv.json.
    Cv(CvArgs),
    /// Run a seeded simulation study.
    Simulate(SimulateArgs),
    /// Score an externally produced curves.csv against a simulation truth.
    Score(ScoreArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sttv,
    Regtv,
    Coxph,
}

#[derive(Debug, Args)]
struct ModelFlags {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// JSON run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    variant: Option<Method>,
    /// Number of interior knots.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_scale: Option<f64>,
    /// Comma-separated thresholds, one per covariate.
    #[arg(long, allow_hyphen_values = true)]
    alpha_override: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Center and scale covariates; curves are reported on the original scale.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    multistart: Option<usize>,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    event_col: Option<String>,
    /// Comma-separated covariate columns (default: all other columns).
    #[arg(long)]
    covariates: Option<String>,
    /// Confidence level of the pointwise intervals.
    #[arg(long)]
    level: Option<f64>,
    /// Append constant-effect Cox columns to curves.csv.
    #[arg(long)]
    cox_columns: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Comma-separated K candidates.
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Refit at the chosen K and write curves.csv and model.json.
    #[arg(long)]
    refit: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    covariance: Option<String>,
    /// Fix K instead of cross-validating it.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated variants (sttv, regtv).
    #[arg(long)]
    variants: Option<String>,
    /// Write per-replication curves into curves/.
    #[arg(long)]
    dump_curves: bool,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// curves.csv to score.
    #[arg(long)]
    input: PathBuf,
    /// Scenario JSON with the truth (default: the built-in design).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    level: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub time_column: String,
    pub event_column: String,
    /// Empty means every column other than time and event.
    pub covariates: Vec<String>,
    pub tau: Option<f64>,
    pub standardize: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            time_column: "time".into(),
            event_column: "status".into(),
            covariates: Vec::new(),
            tau: None,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub grid_points: usize,
    pub level: f64,
    pub cox_columns: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            grid_points: 200,
            level: 0.95,
            cox_columns: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub candidates: Vec<usize>,
    pub folds: usize,
    pub refit: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            candidates: DEFAULT_CANDIDATES.to_vec(),
            folds: 10,
            refit: false,
        }
    }
}

/// JSON configuration shared by `fit` and `cv`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `coxph` fits only the constant-effect model; otherwise overrides
    /// `model.variant`.
    pub variant: Option<Method>,
    pub model: FitConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
    pub cv: CvConfig,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config_path: Option<&'a Path>,
    input_path: Option<&'a Path>,
    output_dir: &'a Path,
    seed: u64,
    version: &'static str,
    timestamp: u64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("STTV_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Score(a) => cmd_score(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let report = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": e.exit_code(),
            });
            eprintln!("{report}");
            e.exit_code()
        }
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Argument(format!("{what} list is empty")));
    }
    items
        .iter()
        .map(|s| s.parse().map_err(|_| Error::Argument(format!("bad {what} entry {s:?}"))))
        .collect()
}

fn read_json<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(T::default()),
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_manifest(command: &str, config: Option<&Path>, input: Option<&Path>, output: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(output)?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = RunManifest {
        command,
        config_path: config,
        input_path: input,
        output_dir: output,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        timestamp,
    };
    write_json(&output.join("manifest.json"), &manifest)
}

fn resolve_run_config(m: &ModelFlags) -> Result<RunConfig> {
    let mut cfg: RunConfig = read_json(m.config.as_deref())?;
    if let Some(v) = m.variant {
        cfg.variant = Some(v);
    }
    match cfg.variant {
        Some(Method::Sttv) => cfg.model.variant = Variant::Sttv,
        Some(Method::Regtv) => cfg.model.variant = Variant::Regtv,
        _ => {}
    }
    if let Some(k) = m.k {
        cfg.model.k = k;
    }
    if let Some(a) = m.alpha_scale {
        cfg.model.alpha_scale = a;
    }
    if let Some(raw) = &m.alpha_override {
        cfg.model.alpha_override = Some(parse_list(raw, "alpha-override")?);
    }
    if let Some(eta) = m.eta {
        cfg.model.eta = eta;
    }
    if let Some(rho) = m.rho {
        cfg.model.rho = Some(rho);
    }
    if let Some(s) = m.multistart {
        cfg.model.multistart = s;
    }
    if let Some(seed) = m.seed {
        cfg.model.seed = seed;
    }
    if let Some(tau) = m.tau {
        cfg.data.tau = Some(tau);
    }
    if m.standardize {
        cfg.data.standardize = true;
    }
    if let Some(c) = &m.time_col {
        cfg.data.time_column = c.clone();
    }
    if let Some(c) = &m.event_col {
        cfg.data.event_column = c.clone();
    }
    if let Some(raw) = &m.covariates {
        cfg.data.covariates = parse_list(raw, "covariates")?;
    }
    if let Some(g) = m.grid_points {
        cfg.output.grid_points = g;
    }
    if let Some(l) = m.level {
        cfg.output.level = l;
    }
    if m.cox_columns {
        cfg.output.cox_columns = true;
    }
    if cfg.output.grid_points == 0 {
        return Err(Error::Argument("grid-points must be >= 1".into()));
    }
    if !(cfg.output.level > 0.0 && cfg.output.level < 1.0) {
        return Err(Error::Argument(format!("level must lie in (0,1), got {}", cfg.output.level)));
    }
    cfg.model.validate()?;
    Ok(cfg)
}

fn load_data(path: &Path, data: &DataConfig) -> Result<SurvivalDataset> {
    let covariates = if data.covariates.is_empty() {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        rdr.headers()?
            .iter()
            .filter(|h| *h != data.time_column && *h != data.event_column)
            .map(str::to_string)
            .collect()
    } else {
        data.covariates.clone()
    };
    if covariates.is_empty() {
        return Err(Error::Schema("no covariate columns".into()));
    }
    SurvivalDataset::load_csv(path, &data.time_column, &data.event_column, &covariates, data.tau)
}

/// Midpoint grid `(g - 1/2) tau / G`, which keeps clear of both boundaries.
pub fn curve_grid(tau: f64, points: usize) -> Vec<f64> {
    (0..points).map(|g| (g as f64 + 0.5) * tau / points as f64).collect()
}

struct Prepared {
    ds: SurvivalDataset,
    names: Vec<String>,
    transform: Option<Standardization>,
}

fn prepare(m: &ModelFlags, cfg: &RunConfig) -> Result<Prepared> {
    let raw = load_data(&m.input, &cfg.data)?;
    let names = raw.names();
    if cfg.data.standardize {
        let (ds, t) = raw.standardize();
        Ok(Prepared {
            ds,
            names,
            transform: Some(t),
        })
    } else {
        Ok(Prepared {
            ds: raw,
            names,
            transform: None,
        })
    }
}

fn unscale(t: &Option<Standardization>, j: usize, v: f64) -> f64 {
    match t {
        Some(t) => t.to_original(j, v),
        None => v,
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn cox_interval(cox: &CoxFit, j: usize, level: f64) -> Result<(f64, f64)> {
    let z = normal_quantile(0.5 + level / 2.0)?;
    let se = cox.std_error(j);
    Ok((cox.beta[j] - z * se, cox.beta[j] + z * se))
}

/// Long-format rows `covariate, t, theta_hat, beta_hat, sigma_hat, ci_lower,
/// ci_upper, is_zero` on the original covariate scale.
fn curves_csv(
    curves: &CurveEstimate,
    names: &[String],
    transform: &Option<Standardization>,
    cox: Option<(&CoxFit, f64)>,
) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["covariate", "t", "theta_hat", "beta_hat", "sigma_hat", "ci_lower", "ci_upper", "is_zero"];
    if cox.is_some() {
        header.extend(["cox_beta", "cox_lower", "cox_upper"]);
    }
    w.write_record(&header)?;
    for j in 0..curves.p() {
        let cox_cells = match cox {
            Some((fit, level)) => {
                let (lo, hi) = cox_interval(fit, j, level)?;
                vec![
                    fmt(unscale(transform, j, fit.beta[j])),
                    fmt(unscale(transform, j, lo)),
                    fmt(unscale(transform, j, hi)),
                ]
            }
            None => Vec::new(),
        };
        for (k, &t) in curves.grid.iter().enumerate() {
            let u = |v: f64| fmt(unscale(transform, j, v));
            let (sigma, lo, hi) = match &curves.intervals {
                Some(PointwiseIntervals {
                    sigma_hat,
                    lower,
                    upper,
                    degenerate,
                    ..
                }) => (
                    if degenerate[j][k] { String::new() } else { u(sigma_hat[(j, k)]) },
                    u(lower[(j, k)]),
                    u(upper[(j, k)]),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            let mut rec = vec![
                names[j].clone(),
                t.to_string(),
                u(curves.theta_hat[(j, k)]),
                u(curves.beta_hat[(j, k)]),
                sigma,
                lo,
                hi,
                curves.zero_flags[j][k].to_string(),
            ];
            rec.extend(cox_cells.iter().cloned());
            w.write_record(&rec)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Serialize)]
struct ModelReport<'a> {
    variant: &'a str,
    covariates: &'a [String],
    #[serde(rename = "K")]
    k: usize,
    degree: usize,
    eta: f64,
    rho: f64,
    tau: f64,
    knots: &'a [f64],
    alphas: &'a [f64],
    /// Rows are covariates, on the (possibly standardized) fitting scale.
    gamma_hat: Vec<Vec<f64>>,
    converged: bool,
    stop_reason: crate::optimizer::StopReason,
    iterations: usize,
    grad_norm: f64,
    loglik_path: &'a [f64],
    warm_start: Option<&'a CoxFit>,
    standardization: Option<&'a Standardization>,
    config: &'a FitConfig,
}

fn model_report<'a>(m: &'a FittedModel, names: &'a [String], transform: Option<&'a Standardization>) -> ModelReport<'a> {
    ModelReport {
        variant: m.config.variant.name(),
        covariates: names,
        k: m.config.k,
        degree: m.config.degree,
        eta: m.config.eta,
        rho: m.rho(),
        tau: m.basis.tau(),
        knots: m.basis.knots(),
        alphas: &m.alphas,
        gamma_hat: (0..m.p()).map(|j| m.gamma_hat.row(j).iter().cloned().collect()).collect(),
        converged: m.converged,
        stop_reason: m.stop_reason,
        iterations: m.iterations,
        grad_norm: m.grad_norm,
        loglik_path: &m.loglik_path,
        warm_start: m.warm_start.as_ref(),
        standardization: transform,
        config: &m.config,
    }
}

fn write_fit_outputs(out: &Path, prepared: &Prepared, cfg: &RunConfig) -> Result<()> {
    let grid = curve_grid(prepared.ds.tau(), cfg.output.grid_points);
    if cfg.variant == Some(Method::Coxph) {
        let cox = fit_coxph(&prepared.ds, 1e-9, 50)?;
        let p = prepared.ds.p();
        let g = grid.len();
        let beta = nalgebra::DMatrix::from_fn(p, g, |j, _| cox.beta[j]);
        let z = normal_quantile(0.5 + cfg.output.level / 2.0)?;
        let se: Vec<f64> = (0..p).map(|j| cox.std_error(j)).collect();
        let curves = CurveEstimate {
            grid: grid.clone(),
            theta_hat: beta.clone(),
            beta_hat: beta.clone(),
            zero_flags: vec![vec![false; g]; p],
            intervals: Some(PointwiseIntervals {
                level: cfg.output.level,
                sigma_hat: nalgebra::DMatrix::from_fn(p, g, |j, _| se[j]),
                lower: nalgebra::DMatrix::from_fn(p, g, |j, _| cox.beta[j] - z * se[j]),
                upper: nalgebra::DMatrix::from_fn(p, g, |j, _| cox.beta[j] + z * se[j]),
                fallback: vec![vec![false; g]; p],
                degenerate: (0..p).map(|j| vec![!se[j].is_finite(); g]).collect(),
            }),
        };
        write_atomic(&out.join("curves.csv"), &curves_csv(&curves, &prepared.names, &prepared.transform, None)?)?;
        let report = serde_json::json!({
            "variant": "coxph",
            "covariates": prepared.names,
            "cox": cox,
            "standardization": prepared.transform,
        });
        return write_json(&out.join("model.json"), &report);
    }
    let model = fit(&prepared.ds, &cfg.model)?;
    let curves = match curves_with_intervals(&model, &grid, cfg.output.level) {
        Ok(c) => c,
        Err(e @ Error::Numeric { .. }) => {
            log::warn!("pointwise intervals unavailable: {e}");
            model.estimate_curves(&grid)?
        }
        Err(e) => return Err(e),
    };
    let cox = if cfg.output.cox_columns {
        match &model.warm_start {
            Some(c) => Some((c, cfg.output.level)),
            None => {
                log::warn!("no Cox fit available for comparison columns");
                None
            }
        }
    } else {
        None
    };
    write_atomic(&out.join("curves.csv"), &curves_csv(&curves, &prepared.names, &prepared.transform, cox)?)?;
    write_json(
        &out.join("model.json"),
        &model_report(&model, &prepared.names, prepared.transform.as_ref()),
    )
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let m = &a.model;
    let cfg = resolve_run_config(m)?;
    write_manifest("fit", m.config.as_deref(), Some(&m.input), &m.output, cfg.model.seed)?;
    let prepared = prepare(m, &cfg)?;
    write_fit_outputs(&m.output, &prepared, &cfg)
}

fn cmd_cv(a: CvArgs) -> Result<()> {
    let m = &a.model;
    let mut cfg = resolve_run_config(m)?;
    if let Some(raw) = &a.candidates {
        cfg.cv.candidates = parse_list(raw, "candidates")?;
    }
    if let Some(f) = a.folds {
        cfg.cv.folds = f;
    }
    if a.refit {
        cfg.cv.refit = true;
    }
    if cfg.cv.candidates.is_empty() {
        return Err(Error::Argument("candidates list is empty".into()));
    }
    if cfg.variant == Some(Method::Coxph) {
        return Err(Error::Argument("cross-validation needs a time-varying variant".into()));
    }
    write_manifest("cv", m.config.as_deref(), Some(&m.input), &m.output, cfg.model.seed)?;
    let prepared = prepare(m, &cfg)?;
    let cv = cross_validate(&prepared.ds, &cfg.model, &cfg.cv.candidates, cfg.cv.folds, cfg.model.seed)?;
    write_json(
        &m.output.join("cv.json"),
        &serde_json::json!({
            "variant": cfg.model.variant.name(),
            "seed": cfg.model.seed,
            "result": cv,
        }),
    )?;
    if cfg.cv.refit {
        cfg.model.k = cv.chosen_k;
        write_fit_outputs(&m.output, &prepared, &cfg)?;
    }
    Ok(())
}

fn resolve_study(a: &SimulateArgs) -> Result<StudyConfig> {
    let mut study: StudyConfig = read_json(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        study.seed = seed;
    }
    if let Some(r) = a.reps {
        study.reps = r;
    }
    if let Some(n) = a.n {
        study.scenario.n = n;
    }
    if let Some(c) = &a.covariance {
        study.scenario.covariance = c.parse::<CovarianceStructure>()?;
    }
    if let Some(raw) = &a.variants {
        study.variants = parse_list(raw, "variants")?;
    }
    match (a.k, &a.candidates, a.folds) {
        (Some(k), _, _) => study.k_selection = KSelection::Fixed { k },
        (None, None, None) => {}
        (None, cands, folds) => {
            let (mut c, mut f) = match &study.k_selection {
                KSelection::CrossValidate { candidates, folds } => (candidates.clone(), *folds),
                KSelection::Fixed { .. } => (DEFAULT_CANDIDATES.to_vec(), 10),
            };
            if let Some(raw) = cands {
                c = parse_list(raw, "candidates")?;
            }
            if let Some(x) = folds {
                f = x;
            }
            study.k_selection = KSelection::CrossValidate { candidates: c, folds: f };
        }
    }
    Ok(study)
}

fn simulate_outputs(out: &Path, result: &StudyResult) -> Result<()> {
    let rows = metrics_rows(result);
    let mut buf = Vec::new();
    write_rows(&rows, &mut buf)?;
    write_atomic(&out.join("metrics.csv"), &buf)?;
    let mut buf = Vec::new();
    write_rows(&coverage_rows(result), &mut buf)?;
    write_atomic(&out.join("coverage.csv"), &buf)?;

    let failed: Vec<_> = result
        .outcomes
        .iter()
        .filter(|o| o.error.is_some())
        .map(|o| serde_json::json!({"rep": o.rep, "seed": o.seed, "variant": o.variant, "error": o.error}))
        .collect();
    let tables = if rows.is_empty() {
        None
    } else {
        Some(summary_from_rows(&rows)?)
    };
    if let Some(t) = &tables {
        write_atomic(&out.join("summary.md"), t.to_markdown().as_bytes())?;
    }
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({
            "config": result.config,
            "mean_censoring_rate": result.mean_censoring_rate,
            "variants": result.summaries,
            "tables": tables,
            "failed_reps": failed,
        }),
    )?;
    let dumps: Vec<_> = result.outcomes.iter().filter(|o| o.curves.is_some()).collect();
    if !dumps.is_empty() {
        let dir = out.join("curves");
        std::fs::create_dir_all(&dir)?;
        for o in dumps {
            let c = o.curves.as_ref().expect("filtered");
            let to_m = |rows: &Vec<Vec<f64>>| nalgebra::DMatrix::from_fn(rows.len(), result.grid.len(), |j, k| rows[j][k]);
            let beta = to_m(&c.beta_hat);
            let p = beta.nrows();
            let g = result.grid.len();
            let intervals = match (&c.sigma_hat, &c.lower, &c.upper) {
                (Some(s), Some(l), Some(u)) => {
                    let sigma = to_m(s);
                    Some(PointwiseIntervals {
                        level: result.config.level,
                        degenerate: (0..p).map(|j| (0..g).map(|k| sigma[(j, k)] == 0.0).collect()).collect(),
                        sigma_hat: sigma,
                        lower: to_m(l),
                        upper: to_m(u),
                        fallback: vec![vec![false; g]; p],
                    })
                }
                _ => None,
            };
            let curves = CurveEstimate {
                grid: result.grid.clone(),
                theta_hat: to_m(&c.theta_hat),
                zero_flags: (0..p)
                    .map(|j| (0..g).map(|k| o.variant == Variant::Sttv && beta[(j, k)] == 0.0).collect())
                    .collect(),
                beta_hat: beta,
                intervals,
            };
            let names: Vec<String> = (1..=p).map(|j| format!("Z{j}")).collect();
            let bytes = curves_csv(&curves, &names, &None, None)?;
            write_atomic(&dir.join(format!("rep{:04}_{}.csv", o.rep, o.variant.name())), &bytes)?;
        }
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let study = resolve_study(&a)?;
    write_manifest("simulate", a.config.as_deref(), None, &a.output, study.seed)?;
    let result = replicate(&study, a.jobs.unwrap_or(1), a.dump_curves)?;
    simulate_outputs(&a.output, &result)
}

/// Reads a curves.csv (as written by `fit` or the simulation dumps) back
/// into a curve estimate; intervals are kept when every row has them.
pub fn read_curves_csv(path: &Path) -> Result<CurveEstimate> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(None, format!("curves file is missing column '{name}'")))
    };
    let (ci, ti, bi, li, ui) = (col("covariate")?, col("t")?, col("beta_hat")?, col("ci_lower")?, col("ci_upper")?);
    let theta_i = headers.iter().position(|h| h == "theta_hat");
    let sigma_i = headers.iter().position(|h| h == "sigma_hat");
    let mut names: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<(f64, f64, f64, Option<f64>, Option<f64>, Option<f64>)>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let num = |i: usize, name: &str| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|_| Error::validation(Some(row), format!("column '{name}' is not numeric")))
        };
        let opt = |i: Option<usize>| -> Option<f64> { i.and_then(|i| rec.get(i)).and_then(|s| s.parse().ok()) };
        let name = rec.get(ci).unwrap_or("").to_string();
        let j = match names.iter().position(|n| *n == name) {
            Some(j) => j,
            None => {
                names.push(name);
                rows.push(Vec::new());
                names.len() - 1
            }
        };
        let beta = num(bi, "beta_hat")?;
        rows[j].push((
            num(ti, "t")?,
            beta,
            opt(theta_i).unwrap_or(beta),
            opt(Some(li)),
            opt(Some(ui)),
            opt(sigma_i),
        ));
    }
    if rows.is_empty() {
        return Err(Error::validation(None, "curves file has no rows"));
    }
    let grid: Vec<f64> = rows[0].iter().map(|r| r.0).collect();
    for (j, r) in rows.iter().enumerate() {
        if r.len() != grid.len() || r.iter().zip(&grid).any(|(a, t)| a.0 != *t) {
            return Err(Error::validation(None, format!("covariate '{}' uses a different grid", names[j])));
        }
    }
    let p = rows.len();
    let g = grid.len();
    let m = |f: &dyn Fn(&(f64, f64, f64, Option<f64>, Option<f64>, Option<f64>)) -> f64| {
        nalgebra::DMatrix::from_fn(p, g, |j, k| f(&rows[j][k]))
    };
    let has_ci = rows.iter().flatten().all(|r| r.3.is_some() && r.4.is_some());
    let beta_hat = m(&|r| r.1);
    let intervals = has_ci.then(|| PointwiseIntervals {
        level: f64::NAN,
        sigma_hat: m(&|r| r.5.unwrap_or(0.0)),
        lower: m(&|r| r.3.expect("checked")),
        upper: m(&|r| r.4.expect("checked")),
        fallback: vec![vec![false; g]; p],
        degenerate: (0..p).map(|j| (0..g).map(|k| rows[j][k].5.is_none()).collect()).collect(),
    });
    Ok(CurveEstimate {
        zero_flags: (0..p).map(|j| (0..g).map(|k| beta_hat[(j, k)] == 0.0).collect()).collect(),
        grid,
        theta_hat: m(&|r| r.2),
        beta_hat,
        intervals,
    })
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let scenario: Scenario = read_json(a.config.as_deref())?;
    write_manifest("score", a.config.as_deref(), Some(&a.input), &a.output, scenario.seed)?;
    let mut curves = read_curves_csv(&a.input)?;
    if let (Some(iv), Some(level)) = (curves.intervals.as_mut(), a.level) {
        iv.level = level;
    }
    let report = score(&curves, &scenario.curves)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "coefficient", "value"])?;
    for j in 0..3 {
        let c = (j + 1).to_string();
        for (name, v) in [
            ("ise", Some(report.ise[j])),
            ("etpr", report.etpr[j]),
            ("etnr", report.etnr[j]),
            ("itpr", report.itpr[j]),
            ("itnr", report.itnr[j]),
        ] {
            w.write_record([name, c.as_str(), &v.map(|x| x.to_string()).unwrap_or_default()])?;
        }
    }
    w.write_record(["aise", "", &report.aise.to_string()])?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&a.output.join("metrics.csv"), &bytes)?;
    write_json(&a.output.join("metrics.json"), &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_grids() {
        assert_eq!(parse_list::<usize>("3, 5,9", "k").unwrap(), vec![3, 5, 9]);
        assert!(parse_list::<usize>("", "k").is_err());
        assert!(parse_list::<usize>("3,x", "k").is_err());
        let g = curve_grid(2.0, 200);
        assert_eq!(g.len(), 200);
        assert!((g[0] - 2.0 / 400.0).abs() < 1e-15);
        assert!(g[199] < 2.0);
    }

    #[test]
    fn run_config_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"variant": "coxph", "data": {"time_column": "t"}}"#).unwrap();
        assert_eq!(cfg.variant, Some(Method::Coxph));
        assert_eq!(cfg.data.event_column, "status");
        assert_eq!(cfg.output.grid_points, 200);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(main_with_args(["sttv", "--help"]), 0);
        assert_eq!(main_with_args(["sttv", "fit"]), 2);
    }
}
