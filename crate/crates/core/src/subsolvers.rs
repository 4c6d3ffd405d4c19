//! Per-iteration Newton subproblems in frame coordinates.
//!
//! Given `J` (the frame differential), `c = f(p_k)` and an inexactness
//! element `u = u_k`, find a step whose linearization
//! `z + c + J[α; ν] − u` vanishes, or is as small as possible, for some
//! admissible `z ∈ F(exp_{p_k} v, μ_k + ν)`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest number of complementarity slots handled by branch enumeration.
pub const MAX_KKT_SLOTS: usize = 10;
/// Tikhonov term added to singular branch normal equations.
pub const BRANCH_REGULARIZATION: f64 = 1e-12;
/// Relative singular-value cutoff for the plain Newton step.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum StepVariant {
    /// `F ≡ 0`.
    Zero,
    /// Complementarity: multiplier `l` pairs with row `slots.start + l`, and
    /// the last `slots.len()` columns of the differential belong to the
    /// multipliers.
    Kkt { multipliers: Vec<f64>, slots: Range<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRequest {
    pub jacobian: DMatrix<f64>,
    pub value: DVector<f64>,
    pub target: DVector<f64>,
    pub variant: StepVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Frame coefficients of the tangent step.
    pub alpha: DVector<f64>,
    /// Multiplier increments (empty for the plain variant).
    pub nu: DVector<f64>,
    /// The selected element of `F` at the new point.
    pub z: DVector<f64>,
    /// `½‖z + c + J[α; ν] − u‖²`.
    pub objective: f64,
    /// `‖z + c + J[α; ν] − u‖`.
    pub residual: f64,
    /// Complementarity branch id (base-3 digits, see [`SlotState`]).
    pub branch: Option<u32>,
    /// The branch normal equations needed regularization.
    pub regularized: bool,
}

impl StepRequest {
    fn check(&self) -> Result<()> {
        let m = self.jacobian.nrows();
        if self.value.len() != m || self.target.len() != m {
            return Err(Error::InvalidInput(format!(
                "differential has {m} rows but c has {} and u has {} entries",
                self.value.len(),
                self.target.len()
            )));
        }
        if let StepVariant::Kkt { multipliers, slots } = &self.variant {
            if slots.len() != multipliers.len() || slots.end > m || multipliers.len() > self.jacobian.ncols() {
                return Err(Error::InvalidInput("complementarity slots do not fit the request".into()));
            }
            if let Some((slot, &value)) = multipliers.iter().enumerate().find(|(_, mu)| !(**mu >= 0.0)) {
                return Err(Error::InfeasibleMultiplier { slot, value });
            }
        }
        Ok(())
    }
}

/// Dispatches on the request variant.
pub fn solve_step(req: &StepRequest) -> Result<StepResult> {
    match req.variant {
        StepVariant::Zero => solve_linear_step(req),
        StepVariant::Kkt { .. } => solve_kkt_step(req),
    }
}

/// Least-squares step `α = argmin ‖c + Jα − u‖` for `F ≡ 0`.
pub fn solve_linear_step(req: &StepRequest) -> Result<StepResult> {
    req.check()?;
    if req.variant != StepVariant::Zero {
        return Err(Error::Unsupported("linear step on a complementarity request".into()));
    }
    let j = &req.jacobian;
    if j.nrows() < j.ncols() {
        return Err(Error::SingularStep);
    }
    let rhs = &req.target - &req.value;
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= RANK_TOL * smax {
        return Err(Error::SingularStep);
    }
    let alpha = svd.solve(&rhs, 0.0).map_err(|_| Error::SingularStep)?;
    let r = &req.value + j * &alpha - &req.target;
    let residual = r.norm();
    Ok(StepResult {
        alpha,
        nu: DVector::zeros(0),
        z: DVector::zeros(j.nrows()),
        objective: 0.5 * residual * residual,
        residual,
        branch: None,
        regularized: false,
    })
}

/// How a complementarity slot is treated inside one branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotState {
    /// `z = 0`, `ν` free subject to `μ + ν ≥ 0`.
    FreeMultiplier,
    /// `μ + ν = 0`, `z` free subject to `z ≥ 0`.
    FreeSlack,
    /// `z = 0` and `μ + ν = 0`.
    Corner,
}

impl SlotState {
    /// Decodes slot `l` of a base-3 branch id.
    pub fn of(branch: u32, l: usize) -> SlotState {
        match (branch / 3u32.pow(l as u32)) % 3 {
            0 => SlotState::FreeMultiplier,
            1 => SlotState::FreeSlack,
            _ => SlotState::Corner,
        }
    }
}

/// Exact solution of the complementarity-constrained step by enumeration.
///
/// Per slot either `z = 0` with `μ + ν ≥ 0`, or `μ + ν = 0` with `z ≥ 0`.
/// Each piece is convex, so its minimizer is the unconstrained least-squares
/// solution on one of its faces; enumerating the `3^k` faces (the two
/// branches per slot plus their shared corner `z = 0 = μ + ν`) and keeping
/// the sign-feasible one with the smallest objective is exact. Each face is
/// solved through its normal equations. Ties go to the smallest branch id,
/// whose base-3 digit `l` is the [`SlotState`] of slot `l`.
pub fn solve_kkt_step(req: &StepRequest) -> Result<StepResult> {
    req.check()?;
    let StepVariant::Kkt { multipliers, slots } = &req.variant else {
        return Err(Error::Unsupported("complementarity step on a plain request".into()));
    };
    let k = multipliers.len();
    if k == 0 || k > MAX_KKT_SLOTS {
        return Err(Error::Unsupported(format!("{k} complementarity slots (1..={MAX_KKT_SLOTS} supported)")));
    }
    let mut best: Option<StepResult> = None;
    for branch in 0..3u32.pow(k as u32) {
        let Some(candidate) = solve_branch(req, multipliers, slots, branch) else { continue };
        let better = match &best {
            None => true,
            Some(b) => candidate.objective < b.objective - 1e-14 * (1.0 + b.objective),
        };
        if better {
            best = Some(candidate);
        }
    }
    best.ok_or(Error::SubproblemInfeasible)
}

fn solve_branch(req: &StepRequest, mu: &[f64], slots: &Range<usize>, branch: u32) -> Option<StepResult> {
    let j = &req.jacobian;
    let m = j.nrows();
    let k = mu.len();
    let n = j.ncols() - k;
    let states: Vec<SlotState> = (0..k).map(|l| SlotState::of(branch, l)).collect();

    // unknowns: α (n), then ν_l or z_l for every slot that has a free variable
    let free: Vec<usize> = (0..k).filter(|&l| states[l] != SlotState::Corner).collect();
    let dim = n + free.len();
    let mut a = DMatrix::zeros(m, dim);
    a.view_mut((0, 0), (m, n)).copy_from(&j.view((0, 0), (m, n)));
    let mut b = &req.value - &req.target;
    for l in 0..k {
        if states[l] != SlotState::FreeMultiplier {
            b -= j.column(n + l) * mu[l];
        }
    }
    for (col, &l) in free.iter().enumerate() {
        match states[l] {
            SlotState::FreeMultiplier => a.set_column(n + col, &j.column(n + l)),
            _ => a[(slots.start + l, n + col)] = 1.0,
        }
    }

    let ata = a.transpose() * &a;
    let atb = a.transpose() * &b;
    let mut regularized = false;
    let w = match ata.clone().cholesky() {
        Some(ch) => ch.solve(&(-&atb)),
        None => {
            regularized = true;
            let reg = ata + DMatrix::identity(dim, dim) * BRANCH_REGULARIZATION;
            reg.cholesky()?.solve(&(-&atb))
        }
    };
    if w.iter().any(|x| !x.is_finite()) {
        return None;
    }

    let alpha = w.rows(0, n).into_owned();
    let mut nu = DVector::from_iterator(k, mu.iter().map(|m| -m));
    let mut z = DVector::zeros(m);
    for (col, &l) in free.iter().enumerate() {
        let tol = 1e-12 * (1.0 + mu[l].abs());
        let value = w[n + col];
        match states[l] {
            SlotState::FreeMultiplier => {
                let next = mu[l] + value;
                if next < -tol {
                    return None;
                }
                if next >= 0.0 {
                    nu[l] = value;
                }
            }
            _ => {
                if value < -tol {
                    return None;
                }
                z[slots.start + l] = value.max(0.0);
            }
        }
    }

    let mut step = alpha.clone().resize_vertically(n + k, 0.0);
    step.rows_mut(n, k).copy_from(&nu);
    let r = &z + &req.value + j * step - &req.target;
    let residual = r.norm();
    Some(StepResult { alpha, nu, z, objective: 0.5 * residual * residual, residual, branch: Some(branch), regularized })
}
