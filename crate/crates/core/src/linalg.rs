use nalgebra::{DMatrix, DVector};

/// Smallest accepted `min(L_ii^2) / max(A_ii)` for a Cholesky factor before
/// the system is declared singular.
const PIVOT_RATIO: f64 = 1e-10;

/// Solves `A x = b` for a symmetric positive-definite `A`. Returns `None`
/// when `A` is singular or numerically so.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let max_diag = a.diagonal().iter().cloned().fold(0.0_f64, f64::max);
    if !(max_diag > 0.0) || a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = a.cholesky()?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d * d)
        .fold(f64::INFINITY, f64::min);
    if min_pivot / max_diag < PIVOT_RATIO {
        return None;
    }
    Some(chol.solve(b))
}

/// Lower Cholesky factor of a symmetric matrix, `None` if not positive definite.
pub(crate) fn cholesky_lower(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.l())
}
