//! Simulation design with sparse time-varying truths: data generation by
//! inverting the cumulative hazard, the metric battery and seeded
//! replication studies.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Observation, SurvivalDataset};
use crate::error::{Error, Result};
use crate::inference::{curves_with_intervals, CurveEstimate};
use crate::model_selection::{cross_validate, DEFAULT_CANDIDATES};
use crate::optimizer::{fit, FitConfig, Variant};
use crate::rng::{derive_seed, CounterRng};

/// Follow-up horizon and administrative censoring time.
pub const HORIZON: f64 = 3.0;
/// Default baseline hazard. The censoring rate falls as the hazard grows and
/// is about 0.19 at this value; the `calibrate_baseline` example scans it.
pub const DEFAULT_BASELINE_HAZARD: f64 = 0.99;
const HAZARD_STEP: f64 = 1e-3;
const HAZARD_T_MAX: f64 = 20.0;
pub const METRIC_GRID_POINTS: usize = 100;

/// The three sparse coefficient curves of the default design (`j` is 0-based).
pub fn true_beta(j: usize, t: f64) -> f64 {
    match j {
        0 if t <= 3f64.sqrt() => -t * t + 3.0,
        1 if t >= 1.0 => 2.0 * (t + 0.01).ln(),
        2 if t <= 2.0 => -6.0 / (t + 1.0) + 2.0,
        _ => 0.0,
    }
}

pub type CurveFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Coefficient curves used to generate data; always three covariates.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthCurves {
    #[default]
    Benchmark,
    /// Time-constant effects.
    Constant([f64; 3]),
    #[serde(skip)]
    Custom(CurveFn),
}

impl fmt::Debug for TruthCurves {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruthCurves::Benchmark => write!(f, "Benchmark"),
            TruthCurves::Constant(b) => write!(f, "Constant({b:?})"),
            TruthCurves::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl TruthCurves {
    pub fn beta(&self, j: usize, t: f64) -> f64 {
        match self {
            TruthCurves::Benchmark => true_beta(j, t),
            TruthCurves::Constant(b) => b[j],
            TruthCurves::Custom(f) => f(j, t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceStructure {
    Ind,
    Ar1,
    Cs,
}

impl CovarianceStructure {
    pub fn name(&self) -> &'static str {
        match self {
            CovarianceStructure::Ind => "ind",
            CovarianceStructure::Ar1 => "ar1",
            CovarianceStructure::Cs => "cs",
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| match self {
            _ if i == j => 1.0,
            CovarianceStructure::Ind => 0.0,
            CovarianceStructure::Ar1 => 0.5f64.powi((i as i32 - j as i32).abs()),
            CovarianceStructure::Cs => 0.5,
        })
    }
}

impl std::str::FromStr for CovarianceStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ind" => Ok(Self::Ind),
            "ar1" => Ok(Self::Ar1),
            "cs" => Ok(Self::Cs),
            other => Err(Error::Argument(format!("unknown covariance structure {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub curves: TruthCurves,
    pub covariance: CovarianceStructure,
    pub baseline_hazard: f64,
    /// Censoring times are `U(0, censor_upper)`.
    pub censor_upper: f64,
    pub admin_censor: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            curves: TruthCurves::Benchmark,
            covariance: CovarianceStructure::Ind,
            baseline_hazard: DEFAULT_BASELINE_HAZARD,
            censor_upper: 10.0,
            admin_censor: HORIZON,
            n: 500,
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.baseline_hazard.is_finite() && self.baseline_hazard > 0.0) {
            return Err(Error::Argument(format!("baseline hazard must be > 0, got {}", self.baseline_hazard)));
        }
        if self.baseline_hazard >= 1.0 {
            log::warn!("baseline hazard {} lies outside (0, 1)", self.baseline_hazard);
        }
        if !(self.censor_upper > 0.0 && self.admin_censor > 0.0 && self.admin_censor <= HAZARD_T_MAX) {
            return Err(Error::Argument("censoring bounds must be positive and within the hazard grid".into()));
        }
        if self.n == 0 {
            return Err(Error::Argument("n must be >= 1".into()));
        }
        Ok(())
    }
}

/// `n x 3` mean-zero normal covariates with the given correlation.
pub fn draw_covariates(n: usize, structure: CovarianceStructure, seed: u64) -> DMatrix<f64> {
    let mut rng = CounterRng::new(seed, 1);
    draw_covariates_with(&mut rng, n, structure)
}

fn draw_covariates_with(rng: &mut CounterRng, n: usize, structure: CovarianceStructure) -> DMatrix<f64> {
    let l = structure.matrix().cholesky().expect("correlation matrices are positive definite").l();
    let mut z = DMatrix::zeros(n, 3);
    for i in 0..n {
        let e = Vector3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
        let x = l * e;
        for j in 0..3 {
            z[(i, j)] = x[j];
        }
    }
    z
}

/// Coefficient curves tabulated on the hazard integration grid.
pub struct HazardTable {
    /// `3 x nodes`.
    beta: Vec<[f64; 3]>,
    baseline: f64,
}

impl HazardTable {
    pub fn new(sc: &Scenario) -> Self {
        let nodes = (HAZARD_T_MAX / HAZARD_STEP).round() as usize + 1;
        let beta = (0..nodes)
            .map(|k| {
                let t = k as f64 * HAZARD_STEP;
                [sc.curves.beta(0, t), sc.curves.beta(1, t), sc.curves.beta(2, t)]
            })
            .collect();
        Self {
            beta,
            baseline: sc.baseline_hazard,
        }
    }

    fn hazard(&self, z: &[f64], k: usize) -> f64 {
        let b = &self.beta[k];
        self.baseline * (z[0] * b[0] + z[1] * b[1] + z[2] * b[2]).exp()
    }

    /// Solves `Lambda(T) = -log(1 - u)` on the trapezoid-integrated
    /// cumulative hazard, searching no further than `t_cap`; returns `t_cap`
    /// when the hazard does not accumulate enough before it.
    pub fn event_time(&self, z: &[f64], u: f64, t_cap: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Argument(format!("u must lie in (0,1), got {u}")));
        }
        if z.len() != 3 {
            return Err(Error::Argument(format!("expected 3 covariates, got {}", z.len())));
        }
        let target = -(-u).ln_1p();
        let last = ((t_cap.min(HAZARD_T_MAX) / HAZARD_STEP).ceil() as usize).min(self.beta.len() - 1);
        let mut cum = 0.0;
        let mut prev = self.hazard(z, 0);
        for k in 1..=last {
            let next = self.hazard(z, k);
            let inc = 0.5 * HAZARD_STEP * (prev + next);
            if cum + inc >= target {
                // Linear interpolation is the exact inverse of the piecewise
                // linear cumulative hazard.
                let frac = (target - cum) / inc;
                return Ok(((k - 1) as f64 + frac) * HAZARD_STEP);
            }
            cum += inc;
            prev = next;
        }
        Ok(t_cap.min(HAZARD_T_MAX))
    }
}

/// Event time for covariates `z` and uniform draw `u`, integrating the
/// hazard up to the grid end.
pub fn draw_event_time(z: &[f64], sc: &Scenario, u: f64) -> Result<f64> {
    HazardTable::new(sc).event_time(z, u, HAZARD_T_MAX)
}

/// Simulated dataset with `tau` set to the administrative censoring time.
pub fn generate(sc: &Scenario) -> Result<SurvivalDataset> {
    sc.validate()?;
    let table = HazardTable::new(sc);
    let mut rng = CounterRng::new(sc.seed, 0);
    let z = draw_covariates_with(&mut rng, sc.n, sc.covariance);
    let mut obs = Vec::with_capacity(sc.n);
    for i in 0..sc.n {
        let zi = [z[(i, 0)], z[(i, 1)], z[(i, 2)]];
        let c = rng.uniform_range(0.0, sc.censor_upper).min(sc.admin_censor);
        let u = rng.uniform();
        // Times past the censoring time are never observed, so the search
        // stops just beyond it.
        let t = table.event_time(&zi, u, c + HAZARD_STEP)?;
        let event = t <= c;
        obs.push(Observation::new(if event { t } else { c }, event, zi.to_vec()));
    }
    SurvivalDataset::new(obs, Some(sc.admin_censor))?
        .with_covariate_names(vec!["Z1".into(), "Z2".into(), "Z3".into()])
}

/// Share of censored observations.
pub fn censoring_rate(ds: &SurvivalDataset) -> f64 {
    1.0 - ds.event_count() as f64 / ds.n() as f64
}

/// 100 equally spaced points on `[0, 3]`, endpoints included.
pub fn metric_grid() -> Vec<f64> {
    (0..METRIC_GRID_POINTS)
        .map(|g| HORIZON * g as f64 / (METRIC_GRID_POINTS - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub grid: Vec<f64>,
    pub ise: Vec<f64>,
    pub aise: f64,
    pub etpr: Vec<Option<f64>>,
    pub etnr: Vec<Option<f64>>,
    pub itpr: Vec<Option<f64>>,
    pub itnr: Vec<Option<f64>>,
    /// Per coefficient and grid point: truth inside the interval.
    pub coverage: Option<Vec<Vec<bool>>>,
}

fn ratio(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Metric battery for curves estimated on their own grid. ISE averages over
/// the grid points inside the open interval `(0, 3)`; the ratios use every
/// grid point and are `None` when their denominator is empty. Interval
/// metrics need intervals.
pub fn score(curves: &CurveEstimate, truth: &TruthCurves) -> Result<MetricReport> {
    let g = curves.grid.len();
    let p = curves.p();
    if p != 3 || curves.beta_hat.ncols() != g || curves.zero_flags.iter().any(|r| r.len() != g) {
        return Err(Error::Argument(format!(
            "curves are {}x{} with {} grid points; expected 3 coefficients on the grid",
            p,
            curves.beta_hat.ncols(),
            g
        )));
    }
    if let Some(iv) = &curves.intervals {
        if iv.lower.shape() != (p, g) || iv.upper.shape() != (p, g) {
            return Err(Error::Argument("interval matrices do not match the grid".into()));
        }
    }
    let interior: Vec<usize> = (0..g).filter(|&k| curves.grid[k] > 0.0 && curves.grid[k] < HORIZON).collect();
    if interior.is_empty() {
        return Err(Error::Argument(format!("no grid point lies inside (0, {HORIZON})")));
    }
    let mut ise = Vec::with_capacity(p);
    let (mut etpr, mut etnr, mut itpr, mut itnr) = (vec![], vec![], vec![], vec![]);
    let mut coverage = curves.intervals.as_ref().map(|_| vec![vec![false; g]; p]);
    for j in 0..p {
        let truth_j: Vec<f64> = curves.grid.iter().map(|&t| truth.beta(j, t)).collect();
        let sq: f64 = interior.iter().map(|&k| (curves.beta_hat[(j, k)] - truth_j[k]).powi(2)).sum();
        ise.push(sq / interior.len() as f64);
        let nonzero = truth_j.iter().filter(|b| **b != 0.0).count();
        let zero = g - nonzero;
        let tp = (0..g).filter(|&k| truth_j[k] != 0.0 && curves.beta_hat[(j, k)] != 0.0).count();
        let tn = (0..g).filter(|&k| truth_j[k] == 0.0 && curves.beta_hat[(j, k)] == 0.0).count();
        etpr.push(ratio(tp, nonzero));
        etnr.push(ratio(tn, zero));
        match &curves.intervals {
            Some(iv) => {
                let zero_inside = |k: usize| iv.lower[(j, k)] <= 0.0 && 0.0 <= iv.upper[(j, k)];
                let itp = (0..g).filter(|&k| truth_j[k] != 0.0 && !zero_inside(k)).count();
                let itn = (0..g).filter(|&k| truth_j[k] == 0.0 && zero_inside(k)).count();
                itpr.push(ratio(itp, nonzero));
                itnr.push(ratio(itn, zero));
                if let Some(cov) = coverage.as_mut() {
                    for k in 0..g {
                        cov[j][k] = iv.lower[(j, k)] <= truth_j[k] && truth_j[k] <= iv.upper[(j, k)];
                    }
                }
            }
            None => {
                itpr.push(None);
                itnr.push(None);
            }
        }
    }
    let aise = ise.iter().sum::<f64>() / p as f64;
    Ok(MetricReport {
        grid: curves.grid.clone(),
        ise,
        aise,
        etpr,
        etnr,
        itpr,
        itnr,
        coverage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum KSelection {
    Fixed {
        #[serde(rename = "K")]
        k: usize,
    },
    CrossValidate {
        candidates: Vec<usize>,
        folds: usize,
    },
}

impl Default for KSelection {
    fn default() -> Self {
        KSelection::CrossValidate {
            candidates: DEFAULT_CANDIDATES.to_vec(),
            folds: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub fit: FitConfig,
    pub variants: Vec<Variant>,
    pub reps: usize,
    pub seed: u64,
    pub k_selection: KSelection,
    /// Confidence level of the pointwise intervals.
    pub level: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            fit: FitConfig::default(),
            variants: vec![Variant::Sttv, Variant::Regtv],
            reps: 200,
            seed: 2024,
            k_selection: KSelection::default(),
            level: 0.95,
        }
    }
}

/// Outcome for one replication and variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub variant: Variant,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub censoring_rate: f64,
    pub report: Option<MetricReport>,
    pub curves: Option<CurveSnapshot>,
    pub error: Option<String>,
}

/// Estimated curves on the metric grid, kept for plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSnapshot {
    pub theta_hat: Vec<Vec<f64>>,
    pub beta_hat: Vec<Vec<f64>>,
    pub sigma_hat: Option<Vec<Vec<f64>>>,
    pub lower: Option<Vec<Vec<f64>>>,
    pub upper: Option<Vec<Vec<f64>>>,
}

/// Mean and sample standard deviation (divisor `n - 1`; zero for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, count: n })
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            sd: self.sd * factor,
            count: self.count,
        }
    }
}

/// Aggregates over successful replications of one variant. ISE and AISE are
/// multiplied by 100; ratios are raw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub successes: usize,
    pub failures: usize,
    pub ise_x100: Vec<Option<MeanSd>>,
    pub aise_x100: Option<MeanSd>,
    pub etpr: Vec<Option<MeanSd>>,
    pub etnr: Vec<Option<MeanSd>>,
    pub itpr: Vec<Option<MeanSd>>,
    pub itnr: Vec<Option<MeanSd>>,
    /// Per coefficient and grid point, share of replications covering the truth.
    pub coverage: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub grid: Vec<f64>,
    pub outcomes: Vec<RepOutcome>,
    pub summaries: Vec<VariantSummary>,
    pub mean_censoring_rate: f64,
}

fn run_rep(study: &StudyConfig, rep: usize, keep_curves: bool) -> Vec<RepOutcome> {
    let seed = derive_seed(study.seed, rep as u64);
    let scenario = Scenario {
        seed,
        ..study.scenario.clone()
    };
    let failed = |variant, rate, e: String| RepOutcome {
        rep,
        seed,
        variant,
        k: None,
        censoring_rate: rate,
        report: None,
        curves: None,
        error: Some(e),
    };
    let ds = match generate(&scenario) {
        Ok(ds) => ds,
        Err(e) => return study.variants.iter().map(|&v| failed(v, f64::NAN, e.to_string())).collect(),
    };
    let rate = censoring_rate(&ds);
    let grid = metric_grid();
    study
        .variants
        .iter()
        .map(|&variant| {
            let cfg = FitConfig {
                variant,
                seed,
                ..study.fit.clone()
            };
            let k = match &study.k_selection {
                KSelection::Fixed { k } => Ok(*k),
                KSelection::CrossValidate { candidates, folds } => {
                    cross_validate(&ds, &cfg, candidates, *folds, seed).map(|cv| cv.chosen_k)
                }
            };
            let k = match k {
                Ok(k) => k,
                Err(e) => return failed(variant, rate, e.to_string()),
            };
            let cfg = FitConfig { k, ..cfg };
            let model = match fit(&ds, &cfg) {
                Ok(m) => m,
                Err(e) => return failed(variant, rate, e.to_string()),
            };
            let curves = match curves_with_intervals(&model, &grid, study.level) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("rep {rep} {}: intervals unavailable: {e}", variant.name());
                    match model.estimate_curves(&grid) {
                        Ok(c) => c,
                        Err(e) => return failed(variant, rate, e.to_string()),
                    }
                }
            };
            let report = match score(&curves, &scenario.curves) {
                Ok(r) => r,
                Err(e) => return failed(variant, rate, e.to_string()),
            };
            let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
                (0..m.nrows()).map(|j| m.row(j).iter().cloned().collect()).collect()
            };
            let snapshot = keep_curves.then(|| CurveSnapshot {
                theta_hat: to_rows(&curves.theta_hat),
                beta_hat: to_rows(&curves.beta_hat),
                sigma_hat: curves.intervals.as_ref().map(|iv| to_rows(&iv.sigma_hat)),
                lower: curves.intervals.as_ref().map(|iv| to_rows(&iv.lower)),
                upper: curves.intervals.as_ref().map(|iv| to_rows(&iv.upper)),
            });
            RepOutcome {
                rep,
                seed,
                variant,
                k: Some(k),
                censoring_rate: rate,
                report: Some(report),
                curves: snapshot,
                error: None,
            }
        })
        .collect()
}

fn summarize(variant: Variant, outcomes: &[RepOutcome]) -> VariantSummary {
    let mine: Vec<&RepOutcome> = outcomes.iter().filter(|o| o.variant == variant).collect();
    let reports: Vec<&MetricReport> = mine.iter().filter_map(|o| o.report.as_ref()).collect();
    let per_coef = |get: &dyn Fn(&MetricReport) -> &Vec<Option<f64>>| -> Vec<Option<MeanSd>> {
        (0..3)
            .map(|j| {
                let vals: Vec<f64> = reports.iter().filter_map(|r| get(r)[j]).collect();
                MeanSd::of(&vals)
            })
            .collect()
    };
    let ise_x100 = (0..3)
        .map(|j| MeanSd::of(&reports.iter().map(|r| r.ise[j]).collect::<Vec<_>>()).map(|m| m.scaled(100.0)))
        .collect();
    let aise_x100 = MeanSd::of(&reports.iter().map(|r| r.aise).collect::<Vec<_>>()).map(|m| m.scaled(100.0));
    let with_cov: Vec<&Vec<Vec<bool>>> = reports.iter().filter_map(|r| r.coverage.as_ref()).collect();
    let coverage = (!with_cov.is_empty()).then(|| {
        let g = with_cov[0][0].len();
        (0..3)
            .map(|j| {
                (0..g)
                    .map(|k| with_cov.iter().filter(|c| c[j][k]).count() as f64 / with_cov.len() as f64)
                    .collect()
            })
            .collect()
    });
    VariantSummary {
        variant,
        successes: reports.len(),
        failures: mine.len() - reports.len(),
        ise_x100,
        aise_x100,
        etpr: per_coef(&|r| &r.etpr),
        etnr: per_coef(&|r| &r.etnr),
        itpr: per_coef(&|r| &r.itpr),
        itnr: per_coef(&|r| &r.itnr),
        coverage,
    }
}

/// Runs `study.reps` seeded replications on `parallelism` threads (0 means
/// the rayon default). Failed replications are recorded and excluded from
/// the aggregates.
pub fn replicate(study: &StudyConfig, parallelism: usize, keep_curves: bool) -> Result<StudyResult> {
    if study.reps == 0 {
        return Err(Error::Argument("reps must be >= 1".into()));
    }
    if study.variants.is_empty() {
        return Err(Error::Argument("at least one variant is required".into()));
    }
    study.scenario.validate()?;
    study.fit.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let outcomes: Vec<RepOutcome> = pool.install(|| {
        (0..study.reps)
            .into_par_iter()
            .flat_map_iter(|rep| run_rep(study, rep, keep_curves))
            .collect()
    });
    for o in outcomes.iter().filter(|o| o.error.is_some()) {
        log::warn!("rep {} {} failed: {}", o.rep, o.variant.name(), o.error.as_deref().unwrap_or(""));
    }
    let mut variants = study.variants.clone();
    variants.dedup();
    let summaries = variants.iter().map(|&v| summarize(v, &outcomes)).collect();
    let rates: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.variant == variants[0] && o.censoring_rate.is_finite())
        .map(|o| o.censoring_rate)
        .collect();
    Ok(StudyResult {
        config: study.clone(),
        grid: metric_grid(),
        outcomes,
        summaries,
        mean_censoring_rate: rates.iter().sum::<f64>() / rates.len().max(1) as f64,
    })
}

/// A clinical-style cohort with six covariates for examples and smoke
/// tests: two effects fade out, one switches on late, one is constant and
/// two are null.
pub fn synthetic_cohort(n: usize, seed: u64) -> Result<SurvivalDataset> {
    let mut rng = CounterRng::new(seed, 7);
    let horizon = 5.0;
    let effect = |j: usize, t: f64| -> f64 {
        match j {
            0 => 0.8 * (1.0 - t / 2.5).max(0.0),
            1 => 0.6 * (t >= 2.0) as u8 as f64 * ((t - 2.0) / 1.5).min(1.0),
            2 => -0.5,
            3 => (-1.0 + t / 2.0).min(0.0),
            _ => 0.0,
        }
    };
    let step = 1e-3;
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let age = rng.standard_normal();
        let stage = (rng.uniform() < 0.4) as u8 as f64;
        let smoker = (rng.uniform() < 0.6) as u8 as f64;
        let treated = (rng.uniform() < 0.5) as u8 as f64;
        let biomarker = rng.standard_normal();
        let noise = rng.standard_normal();
        let z = [age, stage, treated, biomarker, smoker, noise];
        let c = rng.uniform_range(1.0, 12.0).min(horizon);
        let target = -(-rng.uniform()).ln_1p();
        let hazard = |t: f64| 0.25 * (0..6).map(|j| z[j] * effect(j, t)).sum::<f64>().exp();
        let (mut t, mut cum, mut prev) = (0.0, 0.0, hazard(0.0));
        let mut time = None;
        while t < c {
            let next = hazard(t + step);
            let inc = 0.5 * step * (prev + next);
            if cum + inc >= target {
                time = Some(t + step * (target - cum) / inc);
                break;
            }
            cum += inc;
            prev = next;
            t += step;
        }
        let o = match time {
            Some(tt) if tt <= c => Observation::new(tt, true, z.to_vec()),
            _ => Observation::new(c, false, z.to_vec()),
        };
        obs.push(o);
    }
    let names = ["age", "stage", "treatment", "biomarker", "smoker", "noise"];
    SurvivalDataset::new(obs, Some(horizon))?.with_covariate_names(names.iter().map(|s| s.to_string()).collect())
}
