//! Closed forms on the unit sphere with the metric inherited from the
//! ambient space.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::ANTIPODAL_TOL;
use crate::error::{Error, Result};

/// `cos‖v‖ p + sin‖v‖ v/‖v‖`.
pub(super) fn exp(p: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let theta = v.norm();
    if theta >= PI {
        return Err(Error::StepTooLong { norm: theta, limit: PI });
    }
    if theta == 0.0 {
        return Ok(p.clone());
    }
    Ok(p * theta.cos() + v * (theta.sin() / theta))
}

/// `θ/sin θ · (I − ppᵀ)q` with `θ` recovered through `atan2`, which stays
/// accurate for nearby points where `arccos⟨p,q⟩` loses half the digits.
pub(super) fn log(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c = p.dot(q);
    if c <= -1.0 + ANTIPODAL_TOL {
        return Err(Error::Antipodal);
    }
    let w = q - p * c;
    let s = w.norm();
    if s == 0.0 {
        return Ok(DMatrix::zeros(p.nrows(), 1));
    }
    let theta = s.atan2(c);
    Ok(w * (theta / s))
}

/// Great-circle distance `2 asin(‖p − q‖/2)`, symmetric in its arguments.
pub(super) fn dist(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if p.dot(q) <= -1.0 + ANTIPODAL_TOL {
        return Err(Error::Antipodal);
    }
    let chord = (p - q).norm();
    Ok(2.0 * (chord / 2.0).min(1.0).asin())
}

/// Transport along the minimizing great circle:
/// `v − ⟨q, v⟩/(1 + ⟨p, q⟩) · (p + q)`.
pub(super) fn transport(p: &DMatrix<f64>, q: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c = p.dot(q);
    if c <= -1.0 + ANTIPODAL_TOL {
        return Err(Error::Antipodal);
    }
    Ok(v - (p + q) * (q.dot(v) / (1.0 + c)))
}
