//! Cholesky with an escalating diagonal jitter.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Jitter multipliers (relative to the mean diagonal) tried in order.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-6, 1e-5, 1e-4, 1e-3];

#[derive(Debug, Clone)]
pub struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl Factor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }
}

/// Factorizes a symmetric positive-definite matrix, adding `jitter * I`
/// from [`JITTER_LADDER`] until the factorization succeeds.
pub fn cholesky_with_jitter(m: &DMatrix<f64>, what: &str) -> Result<Factor> {
    let n = m.nrows();
    if n == 0 || n != m.ncols() {
        return Err(Error::Numerical(format!(
            "{what}: not a nonempty square matrix"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what}: non-finite entries")));
    }
    let mean_diag = m.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    for &rel in &JITTER_LADDER {
        let jitter = rel * scale;
        let mut a = m.clone();
        if jitter > 0.0 {
            for i in 0..n {
                a[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(a) {
            if chol
                .l_dirty()
                .diagonal()
                .iter()
                .all(|d| d.is_finite() && *d > 0.0)
            {
                return Ok(Factor { chol, jitter });
            }
        }
    }
    Err(Error::Numerical(format!(
        "{what}: Cholesky failed after jitter escalation to {:e} x mean diagonal",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = b.clone();
    l.solve_lower_triangular_mut(&mut x);
    x
}

/// Solves `L^T X = B` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = b.clone();
    l.tr_solve_lower_triangular_mut(&mut x);
    x
}

pub fn solve_lower_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.clone();
    l.solve_lower_triangular_mut(&mut x);
    x
}

pub fn solve_lower_transpose_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.clone();
    l.tr_solve_lower_triangular_mut(&mut x);
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_spd_needs_no_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = cholesky_with_jitter(&m, "test").unwrap();
        assert_eq!(f.jitter, 0.0);
        assert!((f.log_det() - 11f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn singular_psd_gets_jitter() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let f = cholesky_with_jitter(&m, "test").unwrap();
        assert!(f.jitter > 0.0);
    }

    #[test]
    fn indefinite_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            cholesky_with_jitter(&m, "test"),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn triangular_solves() {
        let l = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[4.0, 7.0]);
        let x = solve_lower(&l, &b);
        assert!((&l * &x - &b).amax() < 1e-14);
        let y = solve_lower_transpose(&l, &b);
        assert!((l.transpose() * &y - &b).amax() < 1e-14);
    }
}
