//! Constant-coefficient Cox model (Breslow ties) fitted by Newton-Raphson
//! with step-halving. Supplies the warm start and threshold scale for the
//! time-varying fits.

use nalgebra::{DMatrix, DVector};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

/// Coefficients larger than this in magnitude signal a monotone likelihood.
pub const SEPARATION_LIMIT: f64 = 20.0;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    /// Inverse observed information; infinite on the diagonal for
    /// inestimable (constant) covariates.
    pub covariance: Vec<Vec<f64>>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Covariates held at zero because the column carries no information.
    pub inestimable: Vec<usize>,
}

impl CoxFit {
    pub fn std_error(&self, j: usize) -> f64 {
        self.covariance[j][j].sqrt()
    }
}

struct Sorted {
    z: DMatrix<f64>,
    events: Vec<bool>,
    tie_start: Vec<usize>,
}

fn sorted(ds: &SurvivalDataset, cols: &[usize]) -> Sorted {
    let obs = ds.observations();
    let order = ds.sort_index();
    Sorted {
        z: DMatrix::from_fn(ds.n(), cols.len(), |i, j| obs[order[i]].covariates[cols[j]]),
        events: order.iter().map(|&i| obs[i].event).collect(),
        tie_start: (0..ds.n()).map(|pos| ds.tie_start(pos)).collect(),
    }
}

/// Breslow log partial likelihood, score and information at `beta`, from one
/// backward cumulative pass.
fn breslow(data: &Sorted, beta: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let n = data.z.nrows();
    let p = data.z.ncols();
    let eta: Vec<f64> = (0..n).map(|i| data.z.row(i).transpose().dot(beta)).collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut ll = 0.0;
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut pos = n;
    while pos > 0 {
        let start = data.tie_start[pos - 1];
        for l in start..pos {
            let w = (eta[l] - shift).exp();
            let zl = data.z.row(l).transpose();
            s0 += w;
            s1 += &zl * w;
            s2 += &zl * zl.transpose() * w;
        }
        let mean = &s1 / s0;
        let cov = &s2 / s0 - &mean * mean.transpose();
        for i in start..pos {
            if data.events[i] {
                ll += eta[i] - shift - s0.ln();
                score += data.z.row(i).transpose() - &mean;
                info += &cov;
            }
        }
        pos = start;
    }
    if !ll.is_finite() {
        return Err(Error::numeric(None, "Cox partial likelihood is not finite"));
    }
    Ok((ll, score, info))
}

/// Fits the Cox model; converged once the score max-norm drops below `tol`.
pub fn fit_coxph(ds: &SurvivalDataset, tol: f64, max_iter: usize) -> Result<CoxFit> {
    if ds.event_count() == 0 {
        return Err(Error::validation(None, "Cox fit needs at least one event"));
    }
    let p = ds.p();
    let obs = ds.observations();
    let (active, inestimable): (Vec<usize>, Vec<usize>) = (0..p).partition(|&j| {
        let first = obs[0].covariates[j];
        obs.iter().any(|o| o.covariates[j] != first)
    });
    let data = sorted(ds, &active);
    let k = active.len();
    let mut beta = DVector::zeros(k);
    let (mut ll, mut score, mut info) = breslow(&data, &beta)?;
    let mut iterations = 0;
    let mut converged = score.amax() < tol || k == 0;

    while !converged {
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                message: format!("Cox score max-norm {:.3e} above {tol:.1e}", score.amax()),
                trace: beta.iter().cloned().collect(),
            });
        }
        iterations += 1;
        let step = info
            .clone()
            .cholesky()
            .map(|c| c.solve(&score))
            .or_else(|| info.clone().lu().solve(&score))
            .ok_or_else(|| Error::numeric(None, "singular Cox information matrix"))?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &beta + &step * scale;
            if let Ok(eval) = breslow(&data, &trial) {
                if eval.0 >= ll - 1e-12 * ll.abs().max(1.0) {
                    accepted = Some((trial, eval));
                    break;
                }
            }
            scale *= 0.5;
        }
        let (trial, (nll, nscore, ninfo)) = accepted.ok_or_else(|| Error::NonConvergence {
            iterations,
            message: "step-halving failed to increase the partial likelihood".into(),
            trace: beta.iter().cloned().collect(),
        })?;
        beta = trial;
        ll = nll;
        score = nscore;
        info = ninfo;
        if let Some(j) = beta.iter().position(|b| b.abs() > SEPARATION_LIMIT) {
            return Err(Error::Separation {
                coefficient: active[j],
                limit: SEPARATION_LIMIT,
                last: beta.iter().cloned().collect(),
            });
        }
        converged = score.amax() < tol;
    }

    let cov_active = if k == 0 {
        DMatrix::zeros(0, 0)
    } else {
        info.clone()
            .try_inverse()
            .ok_or_else(|| Error::numeric(None, "singular Cox information matrix"))?
    };
    let mut full_beta = vec![0.0; p];
    let mut covariance = vec![vec![0.0; p]; p];
    for (a, &ja) in active.iter().enumerate() {
        full_beta[ja] = beta[a];
        for (b, &jb) in active.iter().enumerate() {
            covariance[ja][jb] = cov_active[(a, b)];
        }
    }
    for &j in &inestimable {
        covariance[j][j] = f64::INFINITY;
    }
    Ok(CoxFit {
        beta: full_beta,
        covariance,
        loglik: ll,
        iterations,
        converged,
        inestimable,
    })
}

/// Spline coefficients whose rows are constant at the Cox estimates, so
/// `theta_j(t) = a_j` everywhere by partition of unity.
pub fn initial_gamma(fit: &CoxFit, q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(fit.beta.len(), q, |j, _| fit.beta[j])
}
