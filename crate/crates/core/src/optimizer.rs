//! Maximization of the smoothed penalized partial likelihood over the spline
//! coefficients, by damped Newton with a Levenberg shift and Armijo
//! backtracking, falling back to gradient ascent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coxph::{fit_coxph, initial_gamma, CoxFit};
use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::inference::CurveEstimate;
use crate::likelihood::{evaluate, CoefficientBlock, Effect, Evaluation, LikelihoodWorkspace, Order};
use crate::linalg::{shifted_cholesky_solve, spd_inverse};
use crate::rng::CounterRng;
use crate::splines::SplineBasis;

/// Thresholds never go below this, which keeps `alpha > 0` when a warm
/// start coefficient is exactly zero.
pub const ALPHA_FLOOR: f64 = 1e-3;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
const STALL_TOL: f64 = 1e-10;
const STALL_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Soft-thresholded time-varying effects.
    Sttv,
    /// Ridge-penalized splines without thresholding.
    Regtv,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Sttv => "sttv",
            Variant::Regtv => "regtv",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sttv" => Ok(Variant::Sttv),
            "regtv" => Ok(Variant::Regtv),
            other => Err(Error::Argument(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Number of interior knots.
    #[serde(rename = "K")]
    pub k: usize,
    pub degree: usize,
    pub eta: f64,
    /// Ridge weight; `None` means `1/n^2`.
    pub rho: Option<f64>,
    pub alpha_scale: f64,
    pub alpha_override: Option<Vec<f64>>,
    pub tol_grad: f64,
    pub max_iter: usize,
    pub variant: Variant,
    /// Number of starts; starts after the first jitter the warm start.
    pub multistart: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k: 5,
            degree: 3,
            eta: 0.001,
            rho: None,
            alpha_scale: 0.5,
            alpha_override: None,
            tol_grad: 1e-6,
            max_iter: 500,
            variant: Variant::Sttv,
            multistart: 1,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.k < 1 {
            return bad(format!("K must be >= 1, got {}", self.k));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("eta must be > 0, got {}", self.eta));
        }
        if let Some(rho) = self.rho {
            if !(rho.is_finite() && rho > 0.0) {
                return bad(format!("rho must be > 0, got {rho}"));
            }
        }
        if !(self.tol_grad.is_finite() && self.tol_grad > 0.0) {
            return bad(format!("tol_grad must be > 0, got {}", self.tol_grad));
        }
        if !(self.alpha_scale.is_finite() && self.alpha_scale > 0.0) {
            return bad(format!("alpha_scale must be > 0, got {}", self.alpha_scale));
        }
        if let Some(a) = &self.alpha_override {
            if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("alpha_override entries must be > 0".into());
            }
        }
        if self.multistart < 1 {
            return bad("multistart must be >= 1".into());
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    /// Relative objective change below tolerance over consecutive iterations.
    Stalled,
    /// No ascent step could be found at machine precision.
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    /// Configuration with `rho` resolved.
    pub config: FitConfig,
    pub basis: SplineBasis,
    /// `p x q`.
    pub gamma_hat: DMatrix<f64>,
    /// Thresholds used (empty for RegTV).
    pub alphas: Vec<f64>,
    /// Negative Hessian of the objective at `gamma_hat`.
    pub neg_hessian: DMatrix<f64>,
    pub neg_hessian_inv: Option<DMatrix<f64>>,
    pub score_cov: DMatrix<f64>,
    sandwich: std::result::Result<DMatrix<f64>, String>,
    pub loglik_path: Vec<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub grad_norm: f64,
    pub iterations: usize,
    pub warm_start: Option<CoxFit>,
    pub n: usize,
}

impl FittedModel {
    pub fn p(&self) -> usize {
        self.gamma_hat.nrows()
    }

    pub fn rho(&self) -> f64 {
        self.config.rho.expect("resolved at fit time")
    }

    pub fn objective(&self) -> f64 {
        *self.loglik_path.last().expect("path holds the start value")
    }

    pub fn effect(&self) -> Effect {
        match self.config.variant {
            Variant::Sttv => Effect::Thresholded {
                alphas: self.alphas.clone(),
                eta: self.config.eta,
            },
            Variant::Regtv => Effect::Linear,
        }
    }

    pub fn coefficients(&self) -> CoefficientBlock {
        CoefficientBlock {
            gamma: self.gamma_hat.clone(),
            effect: self.effect(),
        }
    }

    /// `H^{-1} Sigma H^{-1}` at `gamma_hat`.
    pub fn sandwich(&self) -> Result<&DMatrix<f64>> {
        self.sandwich.as_ref().map_err(|m| Error::numeric(None, m.clone()))
    }

    /// `theta_hat_j(t)` for every covariate.
    pub fn theta_at(&self, t: f64) -> Result<Vec<f64>> {
        let b = self.basis.eval(t)?;
        Ok((0..self.p())
            .map(|j| (0..b.len()).map(|k| b[k] * self.gamma_hat[(j, k)]).sum())
            .collect())
    }

    /// Reported effects `beta_hat_j(t)`: exact soft thresholding for STTV,
    /// `theta_hat` for RegTV.
    pub fn beta_at(&self, t: f64) -> Result<Vec<f64>> {
        let theta = self.theta_at(t)?;
        let cb = self.coefficients();
        Ok(theta.iter().enumerate().map(|(j, &th)| cb.reported_effect(j, th)).collect())
    }

    pub fn estimate_curves(&self, grid: &[f64]) -> Result<CurveEstimate> {
        let p = self.p();
        let g = grid.len();
        let mut theta_hat = DMatrix::zeros(p, g);
        let mut beta_hat = DMatrix::zeros(p, g);
        let mut zero_flags = vec![vec![false; g]; p];
        let cb = self.coefficients();
        for (k, &t) in grid.iter().enumerate() {
            let theta = self.theta_at(t)?;
            for j in 0..p {
                let b = cb.reported_effect(j, theta[j]);
                theta_hat[(j, k)] = theta[j];
                beta_hat[(j, k)] = b;
                zero_flags[j][k] = self.config.variant == Variant::Sttv && b == 0.0;
            }
        }
        Ok(CurveEstimate {
            grid: grid.to_vec(),
            theta_hat,
            beta_hat,
            zero_flags,
            intervals: None,
        })
    }
}

struct Trajectory {
    gamma: DVector<f64>,
    eval: Evaluation,
    path: Vec<f64>,
    reason: StopReason,
    grad_norm: f64,
    iterations: usize,
}

/// Fits STTV or RegTV to `ds`.
pub fn fit(ds: &SurvivalDataset, cfg: &FitConfig) -> Result<FittedModel> {
    cfg.validate()?;
    if ds.event_count() == 0 {
        return Err(Error::validation(None, "dataset has no events"));
    }
    let p = ds.p();
    if let Some(a) = &cfg.alpha_override {
        if a.len() != p {
            return Err(Error::Argument(format!("alpha_override has {} entries for {p} covariates", a.len())));
        }
    }
    let basis = SplineBasis::new(cfg.k, cfg.degree, ds.tau())?;
    let q = basis.q();
    let n = ds.n();
    let rho = cfg.rho.unwrap_or(1.0 / (n as f64 * n as f64));

    let (warm_start, gamma0) = match fit_coxph(ds, 1e-9, 50) {
        Ok(cox) => {
            let g = initial_gamma(&cox, q);
            (Some(cox), g)
        }
        Err(Error::Separation { coefficient, .. }) => {
            if cfg.variant == Variant::Sttv && cfg.alpha_override.is_none() {
                return Err(Error::Argument(format!(
                    "Cox warm start separates on covariate {coefficient}; supply alpha_override"
                )));
            }
            log::warn!("Cox warm start separates on covariate {coefficient}; starting from zero");
            (None, DMatrix::zeros(p, q))
        }
        Err(e) => return Err(e),
    };

    let alphas = match cfg.variant {
        Variant::Regtv => Vec::new(),
        Variant::Sttv => match &cfg.alpha_override {
            Some(a) => a.clone(),
            None => {
                let cox = warm_start.as_ref().expect("warm start present without override");
                cox.beta.iter().map(|a| (cfg.alpha_scale * a.abs()).max(ALPHA_FLOOR)).collect()
            }
        },
    };
    let effect = match cfg.variant {
        Variant::Sttv => Effect::Thresholded {
            alphas: alphas.clone(),
            eta: cfg.eta,
        },
        Variant::Regtv => Effect::Linear,
    };
    let ws = LikelihoodWorkspace::new(ds, &basis, rho)?;
    let start = CoefficientBlock::new(gamma0, effect)?;

    let mut best = maximize(&start, &ws, cfg)?;
    if cfg.multistart > 1 {
        let mut rng = CounterRng::new(cfg.seed, 0x6d75_6c74);
        for s in 1..cfg.multistart {
            let jittered = DMatrix::from_fn(p, q, |j, k| {
                let scale = 0.1 * (start.gamma[(j, k)].abs() + 0.1);
                start.gamma[(j, k)] + scale * rng.standard_normal()
            });
            match maximize(&start.with_gamma(jittered), &ws, cfg) {
                Ok(t) if t.eval.value > best.eval.value => {
                    log::debug!("start {s} improved the objective to {}", t.eval.value);
                    best = t;
                }
                Ok(_) => {}
                Err(e) => log::warn!("start {s} failed: {e}"),
            }
        }
    }

    let Trajectory {
        gamma,
        eval,
        path,
        reason,
        grad_norm,
        iterations,
    } = best;
    let neg_hessian = -eval.hessian.expect("requested");
    let score_cov = eval.score_covariance.expect("requested");
    let (neg_hessian_inv, sandwich) = match spd_inverse(&neg_hessian, "negative Hessian") {
        Ok((inv, _)) => {
            let s = &inv * &score_cov * &inv;
            (Some(inv), Ok((&s + s.transpose()) * 0.5))
        }
        Err(e) => (None, Err(e.to_string())),
    };
    let converged = grad_norm < cfg.tol_grad;
    if !converged {
        log::warn!("stopped ({reason:?}) with gradient max-norm {grad_norm:.3e} after {iterations} iterations");
    }
    let mut config = cfg.clone();
    config.rho = Some(rho);
    Ok(FittedModel {
        config,
        basis,
        gamma_hat: start.with_stacked(&gamma).gamma,
        alphas,
        neg_hessian,
        neg_hessian_inv,
        score_cov,
        sandwich,
        loglik_path: path,
        converged,
        stop_reason: reason,
        grad_norm,
        iterations,
        warm_start,
        n,
    })
}

fn maximize(start: &CoefficientBlock, ws: &LikelihoodWorkspace, cfg: &FitConfig) -> Result<Trajectory> {
    let mut gamma = start.stacked();
    let mut eval = evaluate(start, ws, Order::Hessian)?;
    let mut path = vec![eval.value];
    let mut stall = 0;
    let mut iterations = 0;
    loop {
        let grad = eval.gradient.as_ref().expect("requested");
        let gnorm = grad.amax();
        if gnorm < cfg.tol_grad {
            return Ok(done(gamma, eval, path, StopReason::Gradient, gnorm, iterations));
        }
        if stall >= STALL_RUN {
            return Ok(done(gamma, eval, path, StopReason::Stalled, gnorm, iterations));
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                message: format!("gradient max-norm {gnorm:.3e} above {:.1e}", cfg.tol_grad),
                trace: path,
            });
        }
        iterations += 1;

        let neg_h = -eval.hessian.as_ref().expect("requested");
        let direction = newton_direction(&neg_h, grad);
        let current = eval.value;
        let mut next = direction.and_then(|d| line_search(start, ws, &gamma, current, grad, &d, 1.0));
        if next.is_none() {
            log::debug!("iteration {iterations}: Newton step rejected, using gradient ascent");
            let step = 1.0 / grad.norm().max(1.0);
            next = line_search(start, ws, &gamma, current, grad, grad, step);
        }
        let Some((g_new, _)) = next else {
            return Ok(done(gamma, eval, path, StopReason::LineSearch, gnorm, iterations));
        };
        let cb = start.with_stacked(&g_new);
        let new_eval = evaluate(&cb, ws, Order::Hessian)?;
        let rel = (new_eval.value - current).abs() / current.abs().max(1.0);
        stall = if rel < STALL_TOL { stall + 1 } else { 0 };
        gamma = g_new;
        path.push(new_eval.value);
        eval = new_eval;
    }
}

fn done(
    gamma: DVector<f64>,
    eval: Evaluation,
    path: Vec<f64>,
    reason: StopReason,
    grad_norm: f64,
    iterations: usize,
) -> Trajectory {
    Trajectory {
        gamma,
        eval,
        path,
        reason,
        grad_norm,
        iterations,
    }
}

/// Solves `(H + lambda I) d = g` with `lambda` starting at zero, then at
/// `1e-6` times the diagonal scale and doubling until positive definite.
fn newton_direction(neg_h: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(d) = shifted_cholesky_solve(neg_h, 0.0, grad) {
        return Some(d);
    }
    let scale = neg_h.diagonal().amax().max(1.0);
    let mut lambda = 1e-6 * scale;
    for _ in 0..80 {
        if let Some(d) = shifted_cholesky_solve(neg_h, lambda, grad) {
            return Some(d);
        }
        lambda *= 2.0;
    }
    None
}

/// Armijo backtracking along `d`; returns the accepted point and value.
fn line_search(
    start: &CoefficientBlock,
    ws: &LikelihoodWorkspace,
    gamma: &DVector<f64>,
    current: f64,
    grad: &DVector<f64>,
    d: &DVector<f64>,
    initial: f64,
) -> Option<(DVector<f64>, f64)> {
    let slope = grad.dot(d);
    if !(slope > 0.0) {
        return None;
    }
    // Increases below the rounding level of the objective cannot be resolved.
    let noise = (1e-13 * current.abs().max(1.0)).min(1e-10);
    let mut step = initial;
    for _ in 0..MAX_BACKTRACKS {
        let trial = gamma + d * step;
        if let Ok(v) = evaluate(&start.with_stacked(&trial), ws, Order::Value).map(|e| e.value) {
            if v >= current + ARMIJO * step * slope || (step * slope < noise && v >= current - noise) {
                return Some((trial, v));
            }
        }
        step *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Observation;

    fn small_dataset(seed: u64, n: usize) -> SurvivalDataset {
        let mut rng = CounterRng::new(seed, 0);
        let obs = (0..n)
            .map(|_| {
                let z = vec![rng.standard_normal(), rng.uniform_range(-1.0, 1.0)];
                let rate = (0.8 * z[0]).exp();
                let t = -rng.uniform().ln() / rate;
                let c = rng.uniform_range(0.0, 3.0);
                Observation::new(t.min(c), t <= c, z)
            })
            .collect();
        SurvivalDataset::new(obs, None).unwrap()
    }

    #[test]
    fn path_is_monotone_and_converges() {
        let ds = small_dataset(11, 120);
        for variant in [Variant::Sttv, Variant::Regtv] {
            let cfg = FitConfig {
                k: 3,
                variant,
                ..FitConfig::default()
            };
            let m = fit(&ds, &cfg).unwrap();
            assert!(m.loglik_path.windows(2).all(|w| w[1] >= w[0] - 1e-10));
            assert!(m.converged, "{variant:?}: {:?} {}", m.stop_reason, m.grad_norm);
            assert!(m.sandwich().is_ok());
        }
    }

    #[test]
    fn zero_events_fail_before_iterating() {
        let obs = (0..5).map(|i| Observation::new(1.0 + i as f64, false, vec![i as f64])).collect();
        let ds = SurvivalDataset::new(obs, None).unwrap();
        assert!(fit(&ds, &FitConfig::default()).is_err());
    }

    #[test]
    fn config_invariants() {
        let bad = [
            FitConfig { k: 0, ..FitConfig::default() },
            FitConfig { eta: 0.0, ..FitConfig::default() },
            FitConfig { rho: Some(0.0), ..FitConfig::default() },
            FitConfig { tol_grad: 0.0, ..FitConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
        let json = r#"{"K": 7, "variant": "regtv"}"#;
        let cfg: FitConfig = serde_json::from_str(json).unwrap();
        assert_eq!((cfg.k, cfg.variant, cfg.degree), (7, Variant::Regtv, 3));
    }

    fn model_with_row(c: f64, alpha: f64) -> FittedModel {
        let ds = small_dataset(2, 40);
        let mut m = fit(
            &ds,
            &FitConfig {
                k: 2,
                ..FitConfig::default()
            },
        )
        .unwrap();
        let q = m.basis.q();
        m.gamma_hat = DMatrix::from_element(2, q, c);
        m.alphas = vec![alpha, alpha];
        m
    }

    #[test]
    fn curves_in_the_dead_zone_and_beyond() {
        let m = model_with_row(0.7, 1.7);
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * m.basis.tau() / 19.0).collect();
        let c = m.estimate_curves(&grid).unwrap();
        assert!(c.beta_hat.iter().all(|&b| b == 0.0));
        assert!(c.zero_flags.iter().flatten().all(|&f| f));

        let m = model_with_row(2.0, 0.5);
        let c = m.estimate_curves(&grid).unwrap();
        assert!(c.beta_hat.iter().all(|&b| (b - 1.5).abs() < 1e-12));
        assert!(m.estimate_curves(&[m.basis.tau() + 1.0]).is_err());
    }

    #[test]
    fn negligible_threshold_reproduces_regtv() {
        let ds = small_dataset(5, 100);
        let sttv = fit(
            &ds,
            &FitConfig {
                k: 3,
                eta: 1e-8,
                alpha_override: Some(vec![1e-8, 1e-8]),
                ..FitConfig::default()
            },
        )
        .unwrap();
        let regtv = fit(
            &ds,
            &FitConfig {
                k: 3,
                variant: Variant::Regtv,
                ..FitConfig::default()
            },
        )
        .unwrap();
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * ds.tau() / 49.0).collect();
        let a = sttv.estimate_curves(&grid).unwrap();
        let b = regtv.estimate_curves(&grid).unwrap();
        assert!((a.beta_hat - b.beta_hat).amax() < 1e-3);
    }
}
