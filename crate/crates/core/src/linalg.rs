use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const COND_WARN: f64 = 1e10;
pub(crate) const COND_LIMIT: f64 = 1e14;

/// Inverse of a symmetric positive definite matrix through its eigen
/// decomposition, refusing when the condition number exceeds [`COND_LIMIT`].
pub(crate) fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, f64)> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || !max.is_finite() {
        return Err(Error::numeric(
            None,
            format!("{what} is not positive definite (smallest eigenvalue {min:.3e}); increase rho or reduce K"),
        ));
    }
    let cond = max / min;
    if cond > COND_LIMIT {
        return Err(Error::numeric(
            None,
            format!("{what} is numerically singular (condition number {cond:.3e}); increase rho or reduce K"),
        ));
    }
    if cond > COND_WARN {
        log::warn!("{what} is ill-conditioned (condition number {cond:.3e})");
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    let v = &eig.eigenvectors;
    let inv = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    Ok((inv, cond))
}

/// Solves `(m + shift I) x = b` by Cholesky, `None` if not positive definite.
pub(crate) fn shifted_cholesky_solve(m: &DMatrix<f64>, shift: f64, b: &DVector<f64>) -> Option<DVector<f64>> {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += shift;
    }
    let x = a.cholesky()?.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let (inv, cond) = spd_inverse(&m, "test").unwrap();
        let id = &m * inv;
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!(cond > 1.0);
    }

    #[test]
    fn rejects_singular_and_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_inverse(&m, "test").is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(spd_inverse(&m, "test").is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-15]);
        assert!(spd_inverse(&m, "test").is_err());
    }

    #[test]
    fn shifted_solve() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(shifted_cholesky_solve(&m, 0.0, &b).is_none());
        let x = shifted_cholesky_solve(&m, 2.0, &b).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }
}
