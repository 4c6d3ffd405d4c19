//! Affine-invariant geometry of the SPD cone,
//! `⟨u, v⟩_p = tr(u p⁻¹ v p⁻¹)`.

use nalgebra::DMatrix;

use crate::linalg::{expm, frobenius_dot, inv_sqrtm, inv_sym, logm, sqrtm};

pub(super) fn inner(p: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let pinv = inv_sym(p);
    let a = u * &pinv;
    let b = v * &pinv;
    // tr(A B) = Σ A_ij B_ji
    frobenius_dot(&a.transpose(), &b)
}

/// `p^{1/2} expm(p^{-1/2} v p^{-1/2}) p^{1/2}`.
pub(super) fn exp(p: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let s = sqrtm(p);
    let si = inv_sqrtm(p);
    &s * expm(&(&si * v * &si)) * &s
}

/// `p^{1/2} logm(p^{-1/2} q p^{-1/2}) p^{1/2}`.
pub(super) fn log(p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let s = sqrtm(p);
    let si = inv_sqrtm(p);
    &s * logm(&(&si * q * &si)) * &s
}

/// `tr^{1/2}(ln²(p^{-1/2} q p^{-1/2}))`.
pub(super) fn dist(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let si = inv_sqrtm(p);
    logm(&(&si * q * &si)).norm()
}

/// `E v Eᵀ` with `E = (q p⁻¹)^{1/2} = p^{1/2} (p^{-1/2} q p^{-1/2})^{1/2} p^{-1/2}`.
pub(super) fn transport(p: &DMatrix<f64>, q: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let s = sqrtm(p);
    let si = inv_sqrtm(p);
    let e = &s * sqrtm(&(&si * q * &si)) * &si;
    &e * v * e.transpose()
}
