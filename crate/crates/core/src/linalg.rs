//! Ridge-penalized least squares through the normal equations.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Relative jitter added to unpenalized diagonal entries when the Gram
/// matrix is not numerically positive definite.
pub const RANK_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    pub coef: Vec<f64>,
    /// True when the plain system was singular and jitter had to be added.
    pub jittered: bool,
}

/// Minimizes `|y - Xw|^2 + sum_j penalties[j] * w_j^2`.
///
/// The Gram matrix is Jacobi-equilibrated before the Cholesky factorization.
/// If that fails, `RANK_JITTER` (relative to the mean diagonal) is added to
/// every unpenalized coefficient and the solve is retried once.
pub fn solve_ridge(x: &DMatrix<f64>, y: &[f64], penalties: &[f64]) -> Result<RidgeSolution> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(CoreError::LengthMismatch { left: n, right: y.len() });
    }
    if penalties.len() != p {
        return Err(CoreError::LengthMismatch { left: p, right: penalties.len() });
    }
    if n == 0 || p == 0 {
        return Err(CoreError::Empty);
    }
    if penalties.iter().any(|l| !(*l >= 0.0)) {
        return Err(CoreError::InvalidArgument("ridge penalties must be nonnegative".into()));
    }
    let yv = DVector::from_column_slice(y);
    let mut gram = x.tr_mul(x);
    let rhs = x.tr_mul(&yv);
    for (j, l) in penalties.iter().enumerate() {
        gram[(j, j)] += l;
    }
    if let Some(coef) = equilibrated_cholesky(&gram, &rhs) {
        return Ok(RidgeSolution { coef, jittered: false });
    }
    let mean_diag = (0..p).map(|j| gram[(j, j)]).sum::<f64>() / p as f64;
    let jitter = RANK_JITTER * mean_diag.max(1.0);
    warn!("ridge system singular; adding {jitter:e} jitter to unpenalized coefficients");
    for (j, l) in penalties.iter().enumerate() {
        if *l == 0.0 {
            gram[(j, j)] += jitter;
        }
    }
    equilibrated_cholesky(&gram, &rhs)
        .map(|coef| RidgeSolution { coef, jittered: true })
        .ok_or(CoreError::RankDeficient)
}

fn equilibrated_cholesky(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<Vec<f64>> {
    let p = gram.nrows();
    let mut d = DVector::zeros(p);
    for j in 0..p {
        let g = gram[(j, j)];
        if !(g > 0.0) || !g.is_finite() {
            return None;
        }
        d[j] = 1.0 / g.sqrt();
    }
    let scaled = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] * d[i] * d[j]);
    let chol = scaled.cholesky()?;
    // reject numerically singular factors rather than returning garbage
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for j in 0..p {
        let v = l[(j, j)].abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo > hi * 1e-7) {
        return None;
    }
    let z = chol.solve(&rhs.component_mul(&d));
    let w = z.component_mul(&d);
    if w.iter().all(|v| v.is_finite()) {
        Some(w.iter().copied().collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..10).map(|i| 3.0 + 2.0 * i as f64).collect();
        let s = solve_ridge(&x, &y, &[0.0, 0.0]).unwrap();
        assert!((s.coef[0] - 3.0).abs() < 1e-10);
        assert!((s.coef[1] - 2.0).abs() < 1e-10);
        assert!(!s.jittered);
    }

    #[test]
    fn penalty_shrinks() {
        let x = DMatrix::from_fn(20, 1, |i, _| i as f64 / 10.0);
        let y: Vec<f64> = (0..20).map(|i| i as f64 / 5.0).collect();
        let free = solve_ridge(&x, &y, &[0.0]).unwrap().coef[0];
        let tight = solve_ridge(&x, &y, &[100.0]).unwrap().coef[0];
        assert!((free - 2.0).abs() < 1e-12);
        assert!(tight.abs() < free.abs());
        // closed form: (x'y) / (x'x + l)
        let xtx: f64 = (0..20).map(|i| (i as f64 / 10.0).powi(2)).sum();
        assert!((tight - 2.0 * xtx / (xtx + 100.0)).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_get_jitter() {
        let x = DMatrix::from_fn(10, 2, |i, _| 1.0 + i as f64);
        let y: Vec<f64> = (0..10).map(|i| 2.0 * (1.0 + i as f64)).collect();
        let s = solve_ridge(&x, &y, &[0.0, 0.0]).unwrap();
        assert!(s.jittered);
        assert!((s.coef[0] + s.coef[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn shape_errors() {
        let x = DMatrix::from_element(3, 2, 1.0);
        assert!(solve_ridge(&x, &[1.0, 2.0], &[0.0, 0.0]).is_err());
        assert!(solve_ridge(&x, &[1.0, 2.0, 3.0], &[0.0]).is_err());
        assert!(solve_ridge(&x, &[1.0, 2.0, 3.0], &[-1.0, 0.0]).is_err());
    }
}
