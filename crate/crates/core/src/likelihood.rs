//! Smoothed penalized log partial likelihood in the stacked spline
//! coefficients, with its exact gradient, Hessian and the empirical score
//! covariance used by the sandwich variance.
//!
//! At an event time `T_i` every subject in the risk set is scored with the
//! same effect vector `b(T_i) = (h(B(T_i)' gamma_1, alpha_1), ...)`, so each
//! event needs one pass over its risk set: `O(|R_i| p^2)` for the weighted
//! moments, plus `O(p^2 (d+1)^2)` to scatter them into the `pq` coordinates
//! thanks to the local support of the basis.

use nalgebra::{DMatrix, DVector};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::splines::{LocalBasis, SplineBasis};
use crate::threshold::{smooth_parts, smooth_value, zeta};

/// How the spline function `theta_j(t)` maps to the effect `beta_j(t)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    /// `beta_j = h_eta(theta_j, alpha_j)`; `eta = 0` means exact soft thresholding.
    Thresholded { alphas: Vec<f64>, eta: f64 },
    /// `beta_j = theta_j` (the unthresholded penalized-spline model).
    Linear,
}

/// Spline coefficients `gamma` (`p x q`, row `j` is `gamma_j`) and the effect map.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBlock {
    pub gamma: DMatrix<f64>,
    pub effect: Effect,
}

impl CoefficientBlock {
    pub fn new(gamma: DMatrix<f64>, effect: Effect) -> Result<Self> {
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::Argument("spline coefficients must be finite".into()));
        }
        if let Effect::Thresholded { alphas, eta } = &effect {
            if alphas.len() != gamma.nrows() {
                return Err(Error::Argument(format!(
                    "{} thresholds for {} covariates",
                    alphas.len(),
                    gamma.nrows()
                )));
            }
            if alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(Error::Argument("thresholds must be positive".into()));
            }
            if !(eta.is_finite() && *eta >= 0.0) {
                return Err(Error::Argument(format!("eta must be >= 0, got {eta}")));
            }
        }
        Ok(Self { gamma, effect })
    }

    pub fn p(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn q(&self) -> usize {
        self.gamma.ncols()
    }

    /// Stacked coefficient vector, block `j` at `j*q .. (j+1)*q`.
    pub fn stacked(&self) -> DVector<f64> {
        let (p, q) = self.gamma.shape();
        DVector::from_fn(p * q, |i, _| self.gamma[(i / q, i % q)])
    }

    pub fn with_stacked(&self, v: &DVector<f64>) -> Self {
        let (p, q) = self.gamma.shape();
        Self {
            gamma: DMatrix::from_fn(p, q, |j, k| v[j * q + k]),
            effect: self.effect.clone(),
        }
    }

    pub fn with_gamma(&self, gamma: DMatrix<f64>) -> Self {
        Self {
            gamma,
            effect: self.effect.clone(),
        }
    }

    /// `beta_j` for spline value `theta` under the surrogate (or identity).
    #[inline]
    pub(crate) fn effect_value(&self, j: usize, theta: f64) -> f64 {
        match &self.effect {
            Effect::Thresholded { alphas, eta } => smooth_value(theta, alphas[j], *eta),
            Effect::Linear => theta,
        }
    }

    #[inline]
    fn effect_parts(&self, j: usize, theta: f64) -> (f64, f64, f64) {
        match &self.effect {
            Effect::Thresholded { alphas, eta } => smooth_parts(theta, alphas[j], *eta),
            Effect::Linear => (theta, 1.0, 0.0),
        }
    }

    /// `beta_j` the way fitted curves are reported: exact soft thresholding.
    pub fn reported_effect(&self, j: usize, theta: f64) -> f64 {
        match &self.effect {
            Effect::Thresholded { alphas, .. } => zeta(theta, alphas[j]),
            Effect::Linear => theta,
        }
    }

    fn require_differentiable(&self) -> Result<()> {
        if let Effect::Thresholded { eta, .. } = &self.effect {
            if *eta == 0.0 {
                return Err(Error::Argument(
                    "derivatives of the thresholded likelihood need eta > 0".into(),
                ));
            }
        }
        Ok(())
    }

    #[inline]
    fn theta_local(&self, j: usize, local: &LocalBasis) -> f64 {
        local
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * self.gamma[(j, local.first + k)])
            .sum()
    }
}

/// `sum_j z_j h(B(t)' gamma_j, alpha_j)` for a full basis vector `bt`.
pub fn linear_predictor(cb: &CoefficientBlock, z: &[f64], bt: &[f64]) -> Result<f64> {
    if z.len() != cb.p() || bt.len() != cb.q() {
        return Err(Error::Argument(format!(
            "dimension mismatch: z has {}, B(t) has {}, coefficients are {}x{}",
            z.len(),
            bt.len(),
            cb.p(),
            cb.q()
        )));
    }
    Ok((0..cb.p())
        .map(|j| {
            let theta: f64 = (0..cb.q()).map(|k| bt[k] * cb.gamma[(j, k)]).sum();
            z[j] * cb.effect_value(j, theta)
        })
        .sum())
}

/// Time-sorted data, cached basis rows and the ridge Gram matrix.
#[derive(Debug, Clone)]
pub struct LikelihoodWorkspace {
    /// Input index of each sorted position.
    order: Vec<usize>,
    events: Vec<bool>,
    /// `n x p`, sorted.
    z: DMatrix<f64>,
    /// First sorted position of the risk set of each sorted position.
    risk_start: Vec<usize>,
    local: Vec<LocalBasis>,
    basis_at_event_times: DMatrix<f64>,
    penalty_gram: DMatrix<f64>,
    rho: f64,
    p: usize,
    q: usize,
}

impl LikelihoodWorkspace {
    pub fn new(ds: &SurvivalDataset, basis: &SplineBasis, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::Argument(format!("rho must be >= 0, got {rho}")));
        }
        if (ds.tau() - basis.tau()).abs() > 1e-12 * ds.tau().max(1.0) {
            return Err(Error::Argument(format!(
                "basis horizon {} differs from dataset tau {}",
                basis.tau(),
                ds.tau()
            )));
        }
        let n = ds.n();
        let p = ds.p();
        let q = basis.q();
        let order = ds.sort_index().to_vec();
        let obs = ds.observations();
        let z = DMatrix::from_fn(n, p, |i, j| obs[order[i]].covariates[j]);
        let events = order.iter().map(|&i| obs[i].event).collect();
        let risk_start = (0..n).map(|pos| ds.tie_start(pos)).collect();
        let local: Vec<LocalBasis> = order
            .iter()
            .map(|&i| basis.eval_local(obs[i].time.min(basis.tau())))
            .collect();
        let mut basis_at_event_times = DMatrix::zeros(n, q);
        let mut penalty_gram = DMatrix::zeros(q, q);
        for (i, lb) in local.iter().enumerate() {
            for (a, va) in lb.values.iter().enumerate() {
                basis_at_event_times[(i, lb.first + a)] = *va;
                for (b, vb) in lb.values.iter().enumerate() {
                    penalty_gram[(lb.first + a, lb.first + b)] += va * vb;
                }
            }
        }
        Ok(Self {
            order,
            events,
            z,
            risk_start,
            local,
            basis_at_event_times,
            penalty_gram,
            rho,
            p,
            q,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `n x q`, rows in time order.
    pub fn basis_at_event_times(&self) -> &DMatrix<f64> {
        &self.basis_at_event_times
    }

    /// `sum_i B(T_i) B(T_i)'` over all observations.
    pub fn penalty_gram(&self) -> &DMatrix<f64> {
        &self.penalty_gram
    }

    fn check(&self, cb: &CoefficientBlock) -> Result<()> {
        if cb.p() != self.p || cb.q() != self.q {
            return Err(Error::Argument(format!(
                "coefficients are {}x{}, workspace expects {}x{}",
                cb.p(),
                cb.q(),
                self.p,
                self.q
            )));
        }
        Ok(())
    }
}

/// What [`evaluate`] should compute beyond the objective value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

/// Objective and requested derivatives at one coefficient block.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
    /// `sum_i Delta_i [S2/S0 - (S1/S0)^{x2}]` including the chain-rule factors.
    pub score_covariance: Option<DMatrix<f64>>,
}

/// Per-event weighted risk-set moments.
struct RiskMoments {
    log_s0: f64,
    mean: Vec<f64>,
    /// `S2/S0 - mean mean'`, row-major `p x p`; empty unless requested.
    cov: Vec<f64>,
}

fn risk_moments(
    ws: &LikelihoodWorkspace,
    start: usize,
    effect: &[f64],
    second: bool,
) -> Option<RiskMoments> {
    let p = ws.p;
    let n = ws.n();
    let eta = |l: usize| -> f64 { (0..p).map(|j| ws.z[(l, j)] * effect[j]).sum() };
    let mut max = f64::NEG_INFINITY;
    for l in start..n {
        max = max.max(eta(l));
    }
    if !max.is_finite() {
        return None;
    }
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = if second { vec![0.0; p * p] } else { Vec::new() };
    for l in start..n {
        let w = (eta(l) - max).exp();
        s0 += w;
        for j in 0..p {
            let wz = w * ws.z[(l, j)];
            s1[j] += wz;
            if second {
                for k in 0..=j {
                    s2[j * p + k] += wz * ws.z[(l, k)];
                }
            }
        }
    }
    let mean: Vec<f64> = s1.iter().map(|s| s / s0).collect();
    let mut cov = Vec::new();
    if second {
        cov = vec![0.0; p * p];
        for j in 0..p {
            for k in 0..=j {
                let c = s2[j * p + k] / s0 - mean[j] * mean[k];
                cov[j * p + k] = c;
                cov[k * p + j] = c;
            }
        }
    }
    Some(RiskMoments {
        log_s0: max + s0.ln(),
        mean,
        cov,
    })
}

/// Evaluates the objective `PL(gamma)` and, depending on `order`, its
/// gradient, Hessian and score covariance.
pub fn evaluate(cb: &CoefficientBlock, ws: &LikelihoodWorkspace, order: Order) -> Result<Evaluation> {
    ws.check(cb)?;
    if order >= Order::Gradient {
        cb.require_differentiable()?;
    }
    let (p, q) = (ws.p, ws.q);
    let dim = p * q;
    let want_grad = order >= Order::Gradient;
    let want_hess = order >= Order::Hessian;
    let mut value = 0.0;
    let mut grad = if want_grad { DVector::zeros(dim) } else { DVector::zeros(0) };
    let mut hess = if want_hess { DMatrix::zeros(dim, dim) } else { DMatrix::zeros(0, 0) };
    let mut scov = if want_hess { DMatrix::zeros(dim, dim) } else { DMatrix::zeros(0, 0) };

    let mut effect = vec![0.0; p];
    let mut d1 = vec![0.0; p];
    let mut d2 = vec![0.0; p];
    for i in 0..ws.n() {
        if !ws.events[i] {
            continue;
        }
        let local = &ws.local[i];
        for j in 0..p {
            let theta = cb.theta_local(j, local);
            if want_grad {
                let (h, h1, h2) = cb.effect_parts(j, theta);
                effect[j] = h;
                d1[j] = h1;
                d2[j] = h2;
            } else {
                effect[j] = cb.effect_value(j, theta);
            }
        }
        let moments = risk_moments(ws, ws.risk_start[i], &effect, want_hess)
            .ok_or_else(|| Error::numeric(Some(ws.order[i]), "non-finite linear predictor"))?;
        let own: f64 = (0..p).map(|j| ws.z[(i, j)] * effect[j]).sum();
        let term = own - moments.log_s0;
        if !term.is_finite() {
            return Err(Error::numeric(Some(ws.order[i]), "non-finite log partial likelihood term"));
        }
        value += term;

        if !want_grad {
            continue;
        }
        let m = local.values.len();
        for j in 0..p {
            let resid = ws.z[(i, j)] - moments.mean[j];
            let c = resid * d1[j];
            for a in 0..m {
                grad[j * q + local.first + a] += c * local.values[a];
            }
        }
        if !want_hess {
            continue;
        }
        for j in 0..p {
            for k in 0..p {
                let info = moments.cov[j * p + k] * d1[j] * d1[k];
                let mut curv = -info;
                if j == k {
                    curv += (ws.z[(i, j)] - moments.mean[j]) * d2[j];
                }
                for a in 0..m {
                    let ra = j * q + local.first + a;
                    for b in 0..m {
                        let cb_ = k * q + local.first + b;
                        let bb = local.values[a] * local.values[b];
                        hess[(ra, cb_)] += curv * bb;
                        scov[(ra, cb_)] += info * bb;
                    }
                }
            }
        }
    }

    // Ridge term -rho * sum_j gamma_j' G gamma_j.
    let g = &ws.penalty_gram;
    for j in 0..p {
        let gj = cb.gamma.row(j).transpose();
        let ggj = g * &gj;
        value -= ws.rho * gj.dot(&ggj);
        if want_grad {
            for k in 0..q {
                grad[j * q + k] -= 2.0 * ws.rho * ggj[k];
            }
        }
        if want_hess {
            for a in 0..q {
                for b in 0..q {
                    hess[(j * q + a, j * q + b)] -= 2.0 * ws.rho * g[(a, b)];
                }
            }
        }
    }
    if !value.is_finite() {
        return Err(Error::numeric(None, "objective is not finite"));
    }

    Ok(Evaluation {
        value,
        gradient: want_grad.then_some(grad),
        hessian: want_hess.then_some(hess),
        score_covariance: want_hess.then_some(scov),
    })
}

/// The smoothed penalized log partial likelihood.
pub fn penalized_loglik(cb: &CoefficientBlock, ws: &LikelihoodWorkspace) -> Result<f64> {
    Ok(evaluate(cb, ws, Order::Value)?.value)
}

/// Exact gradient in the stacked ordering.
pub fn gradient(cb: &CoefficientBlock, ws: &LikelihoodWorkspace) -> Result<DVector<f64>> {
    Ok(evaluate(cb, ws, Order::Gradient)?.gradient.expect("requested"))
}

/// Exact Hessian (`pq x pq`, symmetric).
pub fn hessian(cb: &CoefficientBlock, ws: &LikelihoodWorkspace) -> Result<DMatrix<f64>> {
    Ok(evaluate(cb, ws, Order::Hessian)?.hessian.expect("requested"))
}

/// Empirical score covariance summed over events.
pub fn score_covariance(cb: &CoefficientBlock, ws: &LikelihoodWorkspace) -> Result<DMatrix<f64>> {
    Ok(evaluate(cb, ws, Order::Hessian)?
        .score_covariance
        .expect("requested"))
}

/// Unpenalized log partial likelihood with effects given as curves:
/// `sum_i Delta_i { Z_i' beta(T_i) - log sum_{l in R_i} exp(Z_l' beta(T_i)) }`.
///
/// `beta_at` receives an event time and returns the `p` effects there.
pub fn partial_loglik_with_curves<F>(ds: &SurvivalDataset, mut beta_at: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let obs = ds.observations();
    let order = ds.sort_index();
    let n = ds.n();
    let mut total = 0.0;
    for pos in 0..n {
        let o = &obs[order[pos]];
        if !o.event {
            continue;
        }
        let beta = beta_at(o.time)?;
        let lin = |l: usize| -> f64 {
            obs[order[l]]
                .covariates
                .iter()
                .zip(&beta)
                .map(|(z, b)| z * b)
                .sum()
        };
        let start = ds.tie_start(pos);
        let max = (start..n).map(lin).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = (start..n).map(|l| (lin(l) - max).exp()).sum();
        let term = lin(pos) - max - s.ln();
        if !term.is_finite() {
            return Err(Error::numeric(Some(order[pos]), "non-finite partial likelihood term"));
        }
        total += term;
    }
    Ok(total)
}
