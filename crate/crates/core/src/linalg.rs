//! Spectral functions of small symmetric matrices.
//!
//! Everything goes through a symmetric eigendecomposition `A = U diag(λ) Uᵀ`,
//! which is deterministic and accurate enough for the matrix sizes handled
//! here (n ≤ 16).

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues below this floor are clamped before taking a logarithm.
pub const LOG_EIGEN_FLOOR: f64 = 1e-14;

static LOG_CLAMP_COUNT: AtomicUsize = AtomicUsize::new(0);

/// Number of eigenvalues clamped to [`LOG_EIGEN_FLOOR`] by [`logm`] so far.
pub fn log_clamp_count() -> usize {
    LOG_CLAMP_COUNT.load(Ordering::Relaxed)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (a - a.transpose()).amax() <= tol * a.amax().max(1.0)
}

/// Apply a scalar function to the spectrum of a symmetric matrix.
pub fn spectral_map(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(a));
    let vals = eig.eigenvalues.map(f);
    let u = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * vals[j]);
    symmetrize(&(scaled * u.transpose()))
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).first().copied().unwrap_or(f64::NAN)
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(a, f64::exp)
}

pub fn logm(a: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(a, |x| {
        if x < LOG_EIGEN_FLOOR {
            LOG_CLAMP_COUNT.fetch_add(1, Ordering::Relaxed);
            LOG_EIGEN_FLOOR.ln()
        } else {
            x.ln()
        }
    })
}

pub fn sqrtm(a: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(a, |x| x.max(0.0).sqrt())
}

pub fn inv_sqrtm(a: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(a, |x| 1.0 / x.sqrt())
}

pub fn inv_sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(a, |x| 1.0 / x)
}

/// Frobenius inner product `tr(Aᵀ B)`.
pub fn frobenius_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
