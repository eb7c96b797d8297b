//! Pointwise inference for fitted curves: sandwich standard errors, the
//! limiting law of the thresholded estimator and sparse confidence intervals.
//!
//! The thresholded estimator `beta_hat = zeta(theta_hat, alpha)` has a point
//! mass at zero, so its intervals may collapse to `[0, 0]` or be pinned at
//! zero on one side. Four cases, with `P+ = 1 - Phi((alpha - theta)/sigma)`
//! and `P- = Phi((-alpha - theta)/sigma)`:
//!
//! 1. `P+ + P- <= xi`: `[0, 0]`
//! 2. `P+ < xi/2` and `P- < 1 - xi/2`: `[beta - sigma B, 0]`
//! 3. `P- < xi/2` and `P+ < 1 - xi/2`: `[0, beta + sigma A]`
//! 4. otherwise the Wald interval around `beta`.

use nalgebra::DMatrix;
use libm::erfc;

use crate::error::{Error, Result};
use crate::optimizer::{FittedModel, Variant};
use crate::threshold::zeta;

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal quantile: Acklam's rational approximation followed by
/// one Halley refinement step.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!("quantile probability must lie in (0,1), got {p}")));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley step; the residual is taken on the smaller tail for accuracy.
    let e = if x < 0.0 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - 0.5 * erfc(x / std::f64::consts::SQRT_2)
    };
    let u = e / normal_pdf(x);
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Limiting CDF of `zeta(theta_hat, alpha)` when
/// `theta_hat ~ N(theta_tilde, sigma^2)`.
pub fn limiting_cdf(x: f64, theta_tilde: f64, alpha: f64, sigma: f64) -> f64 {
    if x >= 0.0 {
        normal_cdf((x + alpha - theta_tilde) / sigma)
    } else {
        normal_cdf((x - alpha - theta_tilde) / sigma)
    }
}

/// Which of the four sparse-interval constructions was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiCase {
    Zero,
    NonPositive,
    NonNegative,
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub case: CiCase,
    /// Set when cases 2/3 produced a quantile argument outside `(0, 1)` and
    /// the Wald interval was used instead.
    pub fallback: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::Argument(format!("xi must lie in (0,1), got {xi}")));
    }
    Ok(())
}

/// Pointwise `(1 - xi)` sparse confidence interval for `zeta(theta, alpha)`.
pub fn sparse_ci(theta_hat: f64, alpha: f64, sigma: f64, xi: f64) -> Result<Interval> {
    check_sigma(sigma)?;
    check_xi(xi)?;
    if !(alpha > 0.0) {
        return Err(Error::Argument(format!("threshold alpha must be > 0, got {alpha}")));
    }
    let beta = zeta(theta_hat, alpha);
    let p_plus = 1.0 - normal_cdf((alpha - theta_hat) / sigma);
    let p_minus = normal_cdf((-alpha - theta_hat) / sigma);
    let z = normal_quantile(1.0 - xi / 2.0)?;
    let wald = |fallback| Interval {
        lower: beta - sigma * z,
        upper: beta + sigma * z,
        case: CiCase::Wald,
        fallback,
    };

    if p_plus + p_minus <= xi {
        return Ok(Interval {
            lower: 0.0,
            upper: 0.0,
            case: CiCase::Zero,
            fallback: false,
        });
    }
    if p_plus < xi / 2.0 && p_minus < 1.0 - xi / 2.0 {
        let arg = 1.0 - xi + normal_cdf((theta_hat - alpha) / sigma);
        return Ok(match normal_quantile(arg) {
            Ok(b) => Interval {
                lower: beta - sigma * b,
                upper: 0.0,
                case: CiCase::NonPositive,
                fallback: false,
            },
            Err(_) => wald(true),
        });
    }
    if p_minus < xi / 2.0 && p_plus < 1.0 - xi / 2.0 {
        let arg = xi - 1.0 + normal_cdf((theta_hat + alpha) / sigma);
        return Ok(match normal_quantile(arg) {
            Ok(q) => Interval {
                lower: 0.0,
                upper: beta - sigma * q,
                case: CiCase::NonNegative,
                fallback: false,
            },
            Err(_) => wald(true),
        });
    }
    Ok(wald(false))
}

/// `theta_hat +/- sigma z_{xi/2}`.
pub fn wald_ci(theta_hat: f64, sigma: f64, xi: f64) -> Result<Interval> {
    check_sigma(sigma)?;
    check_xi(xi)?;
    let z = normal_quantile(1.0 - xi / 2.0)?;
    Ok(Interval {
        lower: theta_hat - sigma * z,
        upper: theta_hat + sigma * z,
        case: CiCase::Wald,
        fallback: false,
    })
}

/// Sandwich standard error of `theta_hat_j(t)`:
/// `sigma^2 = a' H^{-1} Sigma H^{-1} a` with `a = e_j (x) B(t)`, `H` the
/// negative Hessian and `Sigma` the summed score covariance at `gamma_hat`.
pub fn sigma_nj(m: &FittedModel, j: usize, t: f64) -> Result<f64> {
    if j >= m.p() {
        return Err(Error::Argument(format!("covariate index {j} out of range")));
    }
    let sandwich = m.sandwich()?;
    let q = m.basis.q();
    m.basis.eval(t)?;
    let local = m.basis.eval_local(t);
    let mut var = 0.0;
    for (a, va) in local.values.iter().enumerate() {
        for (b, vb) in local.values.iter().enumerate() {
            var += va * vb * sandwich[(j * q + local.first + a, j * q + local.first + b)];
        }
    }
    if !(var.is_finite() && var > 0.0) {
        return Err(Error::numeric(
            None,
            format!("degenerate variance {var} for covariate {j} at t = {t}; the score carries no information there"),
        ));
    }
    Ok(var.sqrt())
}

/// Pointwise standard errors and intervals on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseIntervals {
    pub level: f64,
    /// `p x |grid|`; zero where the variance is degenerate.
    pub sigma_hat: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    /// Cases 2/3 that fell back to the Wald interval.
    pub fallback: Vec<Vec<bool>>,
    /// Points without score information (no events under the local basis).
    /// Their interval is the `sigma -> 0` limit: `[beta_hat, beta_hat]`.
    pub degenerate: Vec<Vec<bool>>,
}

/// Fitted curves on a grid: `theta_hat`, `beta_hat`, zero flags and,
/// optionally, pointwise intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate {
    pub grid: Vec<f64>,
    /// `p x |grid|`.
    pub theta_hat: DMatrix<f64>,
    pub beta_hat: DMatrix<f64>,
    pub zero_flags: Vec<Vec<bool>>,
    pub intervals: Option<PointwiseIntervals>,
}

impl CurveEstimate {
    pub fn p(&self) -> usize {
        self.theta_hat.nrows()
    }
}

/// Point estimates plus sigma-hat and intervals at level `level` (e.g. 0.95):
/// sparse intervals for STTV fits, Wald intervals for RegTV. Fails when the
/// negative Hessian cannot be inverted.
pub fn curves_with_intervals(m: &FittedModel, grid: &[f64], level: f64) -> Result<CurveEstimate> {
    let xi = 1.0 - level;
    check_xi(xi)?;
    m.sandwich()?;
    let mut curves = m.estimate_curves(grid)?;
    let p = m.p();
    let g = grid.len();
    let mut sigma = DMatrix::zeros(p, g);
    let mut lower = DMatrix::zeros(p, g);
    let mut upper = DMatrix::zeros(p, g);
    let mut fallback = vec![vec![false; g]; p];
    let mut degenerate = vec![vec![false; g]; p];
    for j in 0..p {
        for (k, &t) in grid.iter().enumerate() {
            let theta = curves.theta_hat[(j, k)];
            let beta = curves.beta_hat[(j, k)];
            let s = match sigma_nj(m, j, t) {
                Ok(s) => s,
                Err(Error::Numeric { .. }) => {
                    degenerate[j][k] = true;
                    lower[(j, k)] = beta;
                    upper[(j, k)] = beta;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let ci = match m.config.variant {
                Variant::Sttv => sparse_ci(theta, m.alphas[j], s, xi)?,
                Variant::Regtv => wald_ci(theta, s, xi)?,
            };
            sigma[(j, k)] = s;
            lower[(j, k)] = ci.lower;
            upper[(j, k)] = ci.upper;
            fallback[j][k] = ci.fallback;
        }
    }
    curves.intervals = Some(PointwiseIntervals {
        level,
        sigma_hat: sigma,
        lower,
        upper,
        fallback,
        degenerate,
    });
    Ok(curves)
}
