//! Soft thresholding `zeta(theta, alpha)` and its arctan surrogate `h_eta`.
//!
//! With `u = theta - alpha` and `v = theta + alpha` the surrogate is
//!
//! ```text
//! h = ( [1 + (2/pi) atan(u/eta)] u + [1 - (2/pi) atan(v/eta)] v ) / 2
//! ```
//!
//! The bracketed factors are evaluated through `atan(eta/|x|)` on the side
//! where they are small, so there is no cancellation for `|x| >> eta` and no
//! clamping is needed.

use std::f64::consts::FRAC_2_PI;

use crate::error::{Error, Result};

/// Threshold `alpha > 0` and smoothing scale `eta >= 0` (`eta = 0` is exact
/// soft thresholding).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    alpha: f64,
    eta: f64,
}

impl ThresholdParams {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Argument(format!("threshold alpha must be > 0, got {alpha}")));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::Argument(format!("smoothing eta must be >= 0, got {eta}")));
        }
        Ok(Self { alpha, eta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// `zeta(theta, alpha)` without argument checks.
#[inline]
pub(crate) fn zeta(theta: f64, alpha: f64) -> f64 {
    if theta > alpha {
        theta - alpha
    } else if theta < -alpha {
        theta + alpha
    } else {
        0.0
    }
}

/// `1 + (2/pi) atan(x)`.
#[inline]
fn lower_factor(x: f64) -> f64 {
    if x < 0.0 {
        FRAC_2_PI * (-1.0 / x).atan()
    } else {
        1.0 + FRAC_2_PI * x.atan()
    }
}

/// `1 - (2/pi) atan(x)`.
#[inline]
fn upper_factor(x: f64) -> f64 {
    if x > 0.0 {
        FRAC_2_PI * (1.0 / x).atan()
    } else {
        1.0 + FRAC_2_PI * (-x).atan()
    }
}

/// `x / (1 + x^2)` without overflow.
#[inline]
fn rational(x: f64) -> f64 {
    if x.abs() > 1.0 {
        let r = 1.0 / x;
        r / (1.0 + r * r)
    } else {
        x / (1.0 + x * x)
    }
}

/// `1 / (1 + x^2)^2`, zero once it underflows.
#[inline]
fn inv_sq(x: f64) -> f64 {
    if x.abs() > 1e77 {
        0.0
    } else {
        let s = 1.0 + x * x;
        1.0 / (s * s)
    }
}

#[inline]
pub(crate) fn smooth_value(theta: f64, alpha: f64, eta: f64) -> f64 {
    if eta == 0.0 {
        return zeta(theta, alpha);
    }
    let u = theta - alpha;
    let v = theta + alpha;
    0.5 * (lower_factor(u / eta) * u + upper_factor(v / eta) * v)
}

/// `(h, h', h'')` at `theta` for `eta > 0`.
#[inline]
pub(crate) fn smooth_parts(theta: f64, alpha: f64, eta: f64) -> (f64, f64, f64) {
    let u = theta - alpha;
    let v = theta + alpha;
    let x = u / eta;
    let y = v / eta;
    let a = lower_factor(x);
    let c = upper_factor(y);
    let h = 0.5 * (a * u + c * v);
    let d1 = 0.5 * (a + c) + (rational(x) - rational(y)) / std::f64::consts::PI;
    let d2 = FRAC_2_PI / eta * (inv_sq(x) - inv_sq(y));
    (h, d1, d2)
}

/// Soft thresholding: `theta - alpha` above `alpha`, `theta + alpha` below
/// `-alpha`, zero in between.
pub fn soft_threshold(theta: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Argument(format!("threshold alpha must be > 0, got {alpha}")));
    }
    Ok(zeta(theta, alpha))
}

/// The surrogate `h_eta(theta, alpha)`; equals [`soft_threshold`] when `eta = 0`.
pub fn smooth_threshold(theta: f64, p: &ThresholdParams) -> f64 {
    smooth_value(theta, p.alpha, p.eta)
}

fn require_smooth(p: &ThresholdParams) -> Result<()> {
    if p.eta == 0.0 {
        return Err(Error::Argument(
            "soft thresholding is not differentiable; derivatives need eta > 0".into(),
        ));
    }
    Ok(())
}

/// `d h_eta / d theta`.
pub fn smooth_threshold_d1(theta: f64, p: &ThresholdParams) -> Result<f64> {
    require_smooth(p)?;
    Ok(smooth_parts(theta, p.alpha, p.eta).1)
}

/// `d^2 h_eta / d theta^2`.
pub fn smooth_threshold_d2(theta: f64, p: &ThresholdParams) -> Result<f64> {
    require_smooth(p)?;
    Ok(smooth_parts(theta, p.alpha, p.eta).2)
}
