use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geneq::product_dist;

use super::IterateRecord;

/// Relative slack on certificate inequalities, absorbing rounding in the
/// recorded distances.
const CERT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRadiusInputs {
    pub beta: f64,
    pub epsilon: f64,
    pub iota: f64,
    pub delta_bar: f64,
    pub delta_epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRadiusInputs {
    pub beta: f64,
    pub lipschitz: f64,
    pub iota: f64,
    pub mu: f64,
    pub kappa: f64,
    pub delta: f64,
    pub delta_lipschitz: f64,
}

fn require_positive(values: &[(&str, f64)]) -> Result<()> {
    match values.iter().find(|(_, v)| !(*v > 0.0)) {
        Some((name, v)) => Err(Error::InvalidInput(format!("{name} must be positive, got {v}"))),
        None => Ok(()),
    }
}

/// Supremum of admissible starting radii for linear convergence. `β` may be
/// infinite.
pub fn local_radius_linear(c: &LinearRadiusInputs) -> Result<f64> {
    require_positive(&[
        ("beta", c.beta),
        ("epsilon", c.epsilon),
        ("iota", c.iota),
        ("delta_bar", c.delta_bar),
        ("delta_epsilon", c.delta_epsilon),
    ])?;
    Ok((c.beta / (c.epsilon + c.iota)).min(c.delta_bar).min(c.delta_epsilon))
}

/// Supremum of admissible starting radii for quadratic convergence.
pub fn local_radius_quadratic(c: &QuadraticRadiusInputs) -> Result<f64> {
    require_positive(&[
        ("beta", c.beta),
        ("lipschitz", c.lipschitz),
        ("iota", c.iota),
        ("mu", c.mu),
        ("kappa", c.kappa),
        ("delta", c.delta),
        ("delta_lipschitz", c.delta_lipschitz),
    ])?;
    if c.mu * c.kappa >= 1.0 {
        return Err(Error::InvalidInput(format!("mu*kappa = {} must be below 1", c.mu * c.kappa)));
    }
    let li = c.lipschitz + c.iota;
    Ok((c.beta / li).sqrt().min((1.0 - c.mu * c.kappa) / (c.kappa * li)).min(c.delta).min(c.delta_lipschitz))
}

/// Constants of the semi-local convergence theorem. `a` and `b` are the
/// regularity neighborhood radii; when absent their conditions are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemiLocalConstants {
    pub sigma: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub iota: f64,
    pub delta: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl SemiLocalConstants {
    /// Contraction factor `Θ(ε + ι)`.
    pub fn alpha_hat(&self) -> f64 {
        self.theta * (self.epsilon + self.iota)
    }

    /// Largest `‖y₀‖` the theorem admits.
    pub fn y0_bound(&self) -> f64 {
        let ah = self.alpha_hat();
        let scale = self.theta * (1.0 + self.iota);
        (self.beta / scale)
            .min(self.beta / (1.0 + self.iota))
            .min(self.beta * (1.0 - ah) / (ah - ah * ah + 1.0))
            .min(self.delta * (1.0 - ah) / scale)
    }

    /// Violated hypotheses, empty when the constants are admissible.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let named = [
            ("sigma", self.sigma),
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("theta", self.theta),
            ("epsilon", self.epsilon),
            ("iota", self.iota),
            ("delta", self.delta),
        ];
        for (name, v) in named {
            if !(v > 0.0) {
                out.push(format!("{name} = {v} is not positive"));
            }
        }
        if self.mu * self.sigma >= 1.0 {
            out.push(format!("mu*sigma = {} is not below 1", self.mu * self.sigma));
        } else if self.sigma / (1.0 - self.mu * self.sigma) >= self.theta {
            out.push(format!("theta = {} does not exceed sigma/(1-mu*sigma)", self.theta));
        }
        if self.theta > self.alpha / (2.0 * self.beta) {
            out.push(format!("theta = {} exceeds alpha/(2 beta)", self.theta));
        }
        if self.epsilon + self.iota >= 2.0 * self.beta / self.alpha {
            out.push("epsilon + iota is not below 2 beta/alpha".into());
        }
        if let Some(a) = self.a {
            if self.alpha > a / 2.0 {
                out.push(format!("alpha = {} exceeds a/2", self.alpha));
            }
        }
        if let Some(b) = self.b {
            if self.mu * self.alpha + 2.0 * self.beta > b {
                out.push("mu*alpha + 2 beta exceeds b".into());
            }
        }
        if self.alpha_hat() >= 1.0 {
            out.push(format!("contraction factor {} is not below 1", self.alpha_hat()));
        }
        out
    }
}

/// Outcome of checking a run against the semi-local bounds. Entry `i` of
/// each list refers to iterate `k = i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub valid: bool,
    pub violations: Vec<String>,
    pub alpha_hat: f64,
    /// `Θ(1+ι)‖y₀‖`.
    pub scale: f64,
    pub distance_from_start: Vec<bool>,
    pub step_lengths: Vec<bool>,
    pub tail: Vec<bool>,
}

impl CertificateReport {
    /// Hypotheses hold and every inequality passes.
    pub fn passed(&self) -> bool {
        self.valid
            && self.distance_from_start.iter().all(|b| *b)
            && self.step_lengths.iter().all(|b| *b)
            && self.tail.iter().all(|b| *b)
    }
}

/// Checks a recorded run against the semi-local bounds built from `y0` and
/// the first residual `u0`. Hypothesis failures make the report invalid
/// rather than an error.
pub fn semilocal_certificate(
    consts: &SemiLocalConstants,
    y0: &DVector<f64>,
    u0: &DVector<f64>,
    iterates: &[IterateRecord],
) -> Result<CertificateReport> {
    if iterates.is_empty() {
        return Err(Error::InsufficientData("no iterates to certify".into()));
    }
    let mut violations = consts.violations();
    let y0n = y0.norm();
    if u0.norm() > consts.iota * y0n {
        violations.push(format!("|u0| = {} exceeds iota*|y0| = {}", u0.norm(), consts.iota * y0n));
    }
    if violations.is_empty() && y0n > consts.y0_bound() {
        violations.push(format!("|y0| = {y0n} exceeds the admissible bound {}", consts.y0_bound()));
    }
    let ah = consts.alpha_hat();
    let scale = consts.theta * (1.0 + consts.iota) * y0n;
    let valid = violations.is_empty();
    let holds = |d: f64, bound: f64| d <= bound * (1.0 + CERT_SLACK) + f64::EPSILON * scale;

    let start = &iterates[0].point;
    let last = &iterates[iterates.len() - 1].point;
    let mut distance_from_start = Vec::new();
    let mut step_lengths = Vec::new();
    let mut tail = Vec::new();
    for (k, pair) in iterates.windows(2).enumerate().map(|(i, w)| (i + 1, w)) {
        let kf = k as i32;
        let d0 = product_dist(&pair[1].point, start)?;
        let dstep = product_dist(&pair[1].point, &pair[0].point)?;
        let dtail = product_dist(&pair[1].point, last)?;
        distance_from_start.push(valid && holds(d0, (1.0 - ah.powi(kf)) / (1.0 - ah) * scale));
        step_lengths.push(valid && holds(dstep, ah.powi(kf - 1) * scale));
        tail.push(valid && holds(dtail, ah.powi(kf) / (1.0 - ah) * scale));
    }
    Ok(CertificateReport { valid, violations, alpha_hat: ah, scale, distance_from_start, step_lengths, tail })
}
