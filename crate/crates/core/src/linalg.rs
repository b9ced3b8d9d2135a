//! Small dense-matrix helpers shared by the model and the filters.

use nalgebra::{DMatrix, SymmetricEigen};

pub type Matrix = DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &Matrix) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= 1e-12 * scale
}

/// Inverse of a symmetric positive-definite matrix, or `None` when the
/// Cholesky factorization fails.
pub fn spd_inverse(m: &Matrix) -> Option<Matrix> {
    m.clone().cholesky().map(|c| c.inverse())
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    is_symmetric(m) && m.clone().cholesky().is_some()
}

pub fn is_positive_semidefinite(m: &Matrix) -> bool {
    if !is_symmetric(m) {
        return false;
    }
    let scale = m.amax();
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().all(|&l| l >= -1e-12 * scale.max(1.0))
}

/// Spectral condition number of a symmetric matrix; infinite when it is not
/// positive definite.
pub fn spd_condition(m: &Matrix) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// A factor `L` with `L Lᵀ = m` for a symmetric positive semi-definite `m`.
/// Uses Cholesky when possible, otherwise a clamped eigen square root.
pub fn psd_factor(m: &Matrix) -> Matrix {
    if let Some(c) = m.clone().cholesky() {
        return c.l();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&roots)
}

/// `‖a − b‖_F / max(‖b‖_F, tiny)`.
pub fn relative_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}
