//! Clamped B-spline bases with equally spaced knots on `[0, tau]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// B-spline basis of polynomial degree `degree` with `interior_knot_count`
/// intervals, giving `q = K + d` basis functions.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplineBasis {
    degree: usize,
    interior_knot_count: usize,
    knots: Vec<f64>,
    q: usize,
    tau: f64,
}

/// Basis values that can be nonzero at one point: functions
/// `first..first + values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    pub first: usize,
    pub values: Vec<f64>,
}

impl SplineBasis {
    /// Equally spaced interior knots `k * tau / K`, `k = 1..K-1`, with both
    /// ends repeated `d + 1` times.
    pub fn new(k: usize, degree: usize, tau: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::Argument("number of knot intervals K must be >= 1".into()));
        }
        if degree < 1 {
            return Err(Error::Argument("spline degree d must be >= 1".into()));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Argument(format!("tau must be positive, got {tau}")));
        }
        let mut knots = Vec::with_capacity(k + 2 * degree + 1);
        knots.extend(std::iter::repeat(0.0).take(degree + 1));
        knots.extend((1..k).map(|i| i as f64 * tau / k as f64));
        knots.extend(std::iter::repeat(tau).take(degree + 1));
        Ok(Self {
            degree,
            interior_knot_count: k,
            knots,
            q: k + degree,
            tau,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of knot intervals `K`.
    pub fn interior_knot_count(&self) -> usize {
        self.interior_knot_count
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Interior knots only.
    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.knots.len() - self.degree - 1]
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn check(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.tau {
            return Err(Error::Domain(format!(
                "t = {t} outside basis support [0, {}]",
                self.tau
            )));
        }
        Ok(())
    }

    /// Knot span `s` with `knots[s] <= t < knots[s+1]`; the last span is closed.
    fn span(&self, t: f64) -> usize {
        let last = self.q - 1;
        if t >= self.tau {
            return last;
        }
        let upper = self.knots.partition_point(|&k| k <= t);
        (upper - 1).clamp(self.degree, last)
    }

    /// Nonzero basis values at `t` by the Cox-de Boor triangle. `t` must lie
    /// in `[0, tau]`.
    pub fn eval_local(&self, t: f64) -> LocalBasis {
        let d = self.degree;
        let s = self.span(t);
        let mut n = vec![0.0; d + 1];
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        n[0] = 1.0;
        for j in 1..=d {
            left[j] = t - self.knots[s + 1 - j];
            right[j] = self.knots[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        LocalBasis {
            first: s - d,
            values: n,
        }
    }

    /// Full basis vector `B(t)` of length `q`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.check(t)?;
        let local = self.eval_local(t);
        let mut out = vec![0.0; self.q];
        out[local.first..local.first + local.values.len()].copy_from_slice(&local.values);
        Ok(out)
    }

    /// `len(grid) x q` matrix whose row `g` is `B(grid[g])`.
    pub fn eval_grid(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(grid.len(), self.q);
        for (g, &t) in grid.iter().enumerate() {
            self.check(t)?;
            let local = self.eval_local(t);
            for (k, v) in local.values.iter().enumerate() {
                m[(g, local.first + k)] = *v;
            }
        }
        Ok(m)
    }

    /// `sum_k B_k(t) * coefficients[k]`.
    pub fn combine(&self, t: f64, coefficients: &[f64]) -> Result<f64> {
        self.check(t)?;
        let local = self.eval_local(t);
        Ok(local
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * coefficients[local.first + k])
            .sum())
    }
}

/// Builds a basis; see [`SplineBasis::new`].
pub fn make_basis(k: usize, degree: usize, tau: f64) -> Result<SplineBasis> {
    SplineBasis::new(k, degree, tau)
}
