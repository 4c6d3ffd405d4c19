//! The inexact Newton iteration
//!
//! ```text
//! (f(p_k) + Df(p_k)[v_k] + F(exp_{p_k} v_k)) ∩ R_k(p_k) ≠ ∅,   p_{k+1} = exp_{p_k} v_k
//! ```
//!
//! with pluggable inexactness rules `R_k`, plus rate estimation and the
//! radius and semi-local certificates built on its history.

mod certificate;
mod rate;

use std::io::Write;

use nalgebra::DVector;

pub use certificate::{
    local_radius_linear, local_radius_quadratic, semilocal_certificate, CertificateReport, LinearRadiusInputs,
    QuadraticRadiusInputs, SemiLocalConstants,
};
pub use rate::{
    estimate_rate, estimate_rate_from_distances, estimate_rate_pooled, RateClass, RateEstimate, DEFAULT_RATE_FLOOR,
};

use crate::error::{Error, Result};
use crate::geneq::{differential_matrix, product_dist, residual_from_value, GenEqProblem, ProductPoint, SetValuedPart};
use crate::manifold::{combine_frame, exp_map, Chart};
use crate::subsolvers::{solve_step, StepRequest, StepVariant};

/// Proximity rules pick `u` at this fraction of their strict bound.
pub const PROXIMITY_FILL: f64 = 0.999;
/// Sphere steps at or beyond `π − STEP_GUARD` are rejected.
pub const STEP_GUARD: f64 = 1e-6;

/// Forcing sequence `η_k` for relative-residual rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingSequence {
    Constant(f64),
    /// `η_k = initial · ratioᵏ`.
    Geometric {
        initial: f64,
        ratio: f64,
    },
}

impl ForcingSequence {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            ForcingSequence::Constant(eta) => eta,
            ForcingSequence::Geometric { initial, ratio } => initial * ratio.powi(k as i32),
        }
    }
}

/// The sets `R_k(p)` of admissible residuals, each with a deterministic
/// selector for `u_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum InexactnessRule {
    /// `u_k = 0`.
    Exact,
    /// `u_k = c·ρᵏ·(1, …, 1)`.
    FixedDecay { c: f64, rho: f64 },
    /// `‖u‖ ≤ η_k ‖f(p_k)‖`. Selects `u = 0` unless `extreme`, in which case
    /// the bound is attained along `(1, …, 1)/√m`.
    RelativeBall { forcing: ForcingSequence, extreme: bool },
    /// `‖u‖ < ι d(p_k, p̄)` for a known solution `p̄`.
    ProximityLinear { iota: f64, reference: ProductPoint },
    /// `‖u‖ < ι d²(p_k, p̄)` for a known solution `p̄`.
    ProximityQuadratic { iota: f64, reference: ProductPoint },
}

impl InexactnessRule {
    pub fn name(&self) -> &'static str {
        match self {
            InexactnessRule::Exact => "exact",
            InexactnessRule::FixedDecay { .. } => "fixed_decay",
            InexactnessRule::RelativeBall { .. } => "relative_ball",
            InexactnessRule::ProximityLinear { .. } => "proximity_linear",
            InexactnessRule::ProximityQuadratic { .. } => "proximity_quadratic",
        }
    }

    fn reference(&self) -> Option<&ProductPoint> {
        match self {
            InexactnessRule::ProximityLinear { reference, .. }
            | InexactnessRule::ProximityQuadratic { reference, .. } => Some(reference),
            _ => None,
        }
    }

    /// Upper bound on `‖u‖` admitted at iteration `k` for an `m`-dimensional
    /// residual, and whether it is strict.
    pub fn bound(&self, k: usize, m: usize, norm_f: f64, dist_ref: Option<f64>) -> (f64, bool) {
        match self {
            InexactnessRule::Exact => (0.0, false),
            InexactnessRule::FixedDecay { c, rho } => ((c * rho.powi(k as i32)).abs() * (m as f64).sqrt(), false),
            InexactnessRule::RelativeBall { forcing, .. } => (forcing.at(k) * norm_f, false),
            InexactnessRule::ProximityLinear { iota, .. } => (iota * dist_ref.unwrap_or(f64::NAN), true),
            InexactnessRule::ProximityQuadratic { iota, .. } => {
                let d = dist_ref.unwrap_or(f64::NAN);
                (iota * d * d, true)
            }
        }
    }

    /// Deterministic `u_k ∈ R_k(p_k)`.
    fn select(&self, k: usize, m: usize, norm_f: f64, dist_ref: Option<f64>) -> DVector<f64> {
        let dir = DVector::from_element(m, 1.0 / (m as f64).sqrt());
        match self {
            InexactnessRule::Exact => DVector::zeros(m),
            InexactnessRule::FixedDecay { c, rho } => DVector::from_element(m, c * rho.powi(k as i32)),
            InexactnessRule::RelativeBall { forcing, extreme } => {
                if *extreme {
                    dir * (forcing.at(k) * norm_f)
                } else {
                    DVector::zeros(m)
                }
            }
            InexactnessRule::ProximityLinear { .. } | InexactnessRule::ProximityQuadratic { .. } => {
                let (bound, _) = self.bound(k, m, norm_f, dist_ref);
                dir * (PROXIMITY_FILL * bound)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub tol_phi: f64,
    pub tol_g: f64,
    pub max_iters: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria { tol_phi: 1e-12, tol_g: 1e-12, max_iters: 100 }
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub point: ProductPoint,
    /// `‖Φ‖`: norm of the components outside the complementarity slots.
    pub norm_phi: f64,
    /// Largest constraint value (0 when there are no constraints).
    pub g_value: f64,
    /// `d_e(0, f(p_k) + F(p_k))`.
    pub residual: f64,
    /// `(‖v_k‖² + ‖ν_k‖²)^{1/2}`; 0 on the terminal record.
    pub step_norm: f64,
    /// `‖u_k‖`; 0 on the terminal record.
    pub u_norm: f64,
    /// Distance to the rule's reference point, for proximity rules.
    pub dist_to_reference: Option<f64>,
    /// Distance to the last iterate, filled after the run.
    pub dist_to_final: f64,
}

impl IterateRecord {
    pub fn multiplier(&self) -> f64 {
        self.point.multipliers.first().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    SubproblemInfeasible,
    GeometryError,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::SubproblemInfeasible => "subproblem_infeasible",
            SolveStatus::GeometryError => "geometry_error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub history: Vec<IterateRecord>,
    pub final_point: ProductPoint,
    /// Number of Newton steps taken.
    pub iterations: usize,
    /// The error that stopped a failed run.
    pub failure: Option<Error>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn last(&self) -> &IterateRecord {
        self.history.last().expect("history always holds the starting point")
    }
}

/// Runs the inexact Newton iteration from `start`.
///
/// Returns `Err` only for invalid inputs (wrong chart, infeasible initial
/// multipliers, unsupported `F`); failures during the run are reported
/// through [`SolveReport::status`] with the partial history attached.
pub fn solve(
    problem: &GenEqProblem,
    start: ProductPoint,
    rule: &InexactnessRule,
    stop: &StopCriteria,
) -> Result<SolveReport> {
    if matches!(problem.set_part, SetValuedPart::NegOrthantCone { .. }) {
        return Err(Error::Unsupported("no Newton subsolver for cone constraints".into()));
    }
    problem.value(&start)?;
    if let Some((slot, &value)) = start.multipliers.iter().enumerate().find(|(_, mu)| !(**mu >= 0.0)) {
        return Err(Error::InfeasibleMultiplier { slot, value });
    }
    if let Some(r) = rule.reference() {
        if r.point.chart() != problem.chart() || r.multipliers.len() != problem.multiplier_dim() {
            return Err(Error::InvalidInput("proximity reference does not live on the problem manifold".into()));
        }
    }

    let mut history = Vec::new();
    let mut x = start;
    let mut k = 0;
    let (status, failure) = loop {
        let value = match problem.value(&x) {
            Ok(v) => v,
            Err(e) => break (classify(&e), Some(e)),
        };
        let norm_phi = problem.norm_phi(&value);
        let g_value = problem.constraint_value(&value);
        let res = residual_from_value(problem, &x, &value).unwrap_or(f64::NAN);
        let dist_ref = match rule.reference() {
            Some(r) => match product_dist(&x, r) {
                Ok(d) => Some(d),
                Err(e) => break (classify(&e), Some(e)),
            },
            None => None,
        };
        history.push(IterateRecord {
            k,
            point: x.clone(),
            norm_phi,
            g_value,
            residual: res,
            step_norm: 0.0,
            u_norm: 0.0,
            dist_to_reference: dist_ref,
            dist_to_final: 0.0,
        });

        if norm_phi <= stop.tol_phi && g_value <= stop.tol_g {
            break (SolveStatus::Converged, None);
        }
        if k >= stop.max_iters {
            break (SolveStatus::MaxIters, None);
        }

        let u = rule.select(k, value.len(), value.norm(), dist_ref);
        match newton_step(problem, &x, &value, &u) {
            Ok((next, step_norm)) => {
                let rec = history.last_mut().expect("pushed above");
                rec.step_norm = step_norm;
                rec.u_norm = u.norm();
                x = next;
                k += 1;
            }
            Err(e) => break (classify(&e), Some(e)),
        }
    };

    for rec in history.iter_mut() {
        rec.dist_to_final = product_dist(&rec.point, &x).unwrap_or(f64::NAN);
    }
    Ok(SolveReport { status, history, final_point: x, iterations: k, failure })
}

fn classify(e: &Error) -> SolveStatus {
    match e {
        Error::SubproblemInfeasible | Error::SingularStep | Error::InfeasibleMultiplier { .. } => {
            SolveStatus::SubproblemInfeasible
        }
        _ => SolveStatus::GeometryError,
    }
}

/// One step: assemble the frame subproblem, solve it and move along `exp`.
pub fn newton_step(
    problem: &GenEqProblem,
    x: &ProductPoint,
    value: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<(ProductPoint, f64)> {
    let jacobian = differential_matrix(problem, x)?;
    let variant = match &problem.set_part {
        SetValuedPart::KktComplementarity { slots } => {
            StepVariant::Kkt { multipliers: x.multipliers.clone(), slots: slots.clone() }
        }
        _ => StepVariant::Zero,
    };
    let step = solve_step(&StepRequest { jacobian, value: value.clone(), target: u.clone(), variant })?;
    let v = combine_frame(&problem.frame, &x.point, step.alpha.as_slice())?;
    let vn = v.norm();
    if matches!(problem.chart(), Chart::Sphere(_)) && vn >= std::f64::consts::PI - STEP_GUARD {
        return Err(Error::StepTooLong { norm: vn, limit: std::f64::consts::PI - STEP_GUARD });
    }
    let point = exp_map(&x.point, &v)?;
    let multipliers: Vec<f64> = x.multipliers.iter().zip(step.nu.iter()).map(|(m, n)| m + n).collect();
    let step_norm = (vn * vn + step.nu.norm_squared()).sqrt();
    Ok((ProductPoint::new(point, multipliers), step_norm))
}

/// CSV header of [`write_history_csv`].
pub const HISTORY_COLUMNS: &str = "k,norm_phi,g_value,mu,residual,step_norm,u_norm,dist_to_final";

/// Writes the history with 17 significant digits per float.
pub fn write_history_csv(history: &[IterateRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{HISTORY_COLUMNS}")?;
    for r in history {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.k,
            r.norm_phi,
            r.g_value,
            r.multiplier(),
            r.residual,
            r.step_norm,
            r.u_norm,
            r.dist_to_final
        )?;
    }
    Ok(())
}

/// Parses the numeric rows of a history CSV (the `k` column as a float).
pub fn read_history_csv(text: &str) -> Result<Vec<[f64; 8]>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HISTORY_COLUMNS => {}
        _ => return Err(Error::InvalidInput("missing history header".into())),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let cells: Vec<f64> = l
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad cell `{c}`: {e}"))))
                .collect::<Result<_>>()?;
            cells.try_into().map_err(|_| Error::InvalidInput(format!("expected 8 columns in `{l}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::DMatrix;

    use super::*;
    use crate::geneq::ClosureMap;
    use crate::manifold::{FrameField, ManifoldPoint, TangentVector};

    pub(crate) fn scalar_problem() -> GenEqProblem {
        let map = ClosureMap::new(
            Chart::Euclid(1),
            1,
            |p| Ok(DVector::from_element(1, p.coords()[0] * p.coords()[0] - 2.0)),
            |p| Ok(vec![TangentVector::from_slice(p.clone(), &[2.0 * p.coords()[0]])?]),
        );
        GenEqProblem::new(Arc::new(map), SetValuedPart::Zero, FrameField::Canonical).unwrap()
    }

    fn at(x: f64) -> ProductPoint {
        ProductPoint::plain(ManifoldPoint::euclid(&[x]))
    }

    #[test]
    fn scalar_newton_iterates() {
        let report = solve(&scalar_problem(), at(1.0), &InexactnessRule::Exact, &StopCriteria::default()).unwrap();
        assert!(report.converged());
        assert!(report.iterations <= 5);
        let xs: Vec<f64> = report.history.iter().map(|r| r.point.point.coords()[0]).collect();
        assert_eq!(xs[0], 1.0);
        assert_eq!(xs[1], 1.5);
        assert!((xs[2] - 17.0 / 12.0).abs() < 1e-15);
        assert!((report.final_point.point.coords()[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn starting_at_solution_takes_no_step() {
        let report =
            solve(&scalar_problem(), at(2f64.sqrt()), &InexactnessRule::Exact, &StopCriteria::default()).unwrap();
        assert!(report.converged());
        assert_eq!(report.iterations, 0);
        assert_eq!(report.history.len(), 1);
    }

    #[test]
    fn max_iters_is_reported() {
        let stop = StopCriteria { max_iters: 2, ..Default::default() };
        let report = solve(&scalar_problem(), at(1.0), &InexactnessRule::Exact, &stop).unwrap();
        assert_eq!(report.status, SolveStatus::MaxIters);
        assert_eq!(report.history.len(), 3);
    }

    #[test]
    fn singular_differential_fails_with_history() {
        let report = solve(&scalar_problem(), at(0.0), &InexactnessRule::Exact, &StopCriteria::default()).unwrap();
        assert_eq!(report.status, SolveStatus::SubproblemInfeasible);
        assert_eq!(report.failure, Some(Error::SingularStep));
        assert_eq!(report.history.len(), 1);
    }

    #[test]
    fn fixed_decay_records_its_schedule() {
        let rule = InexactnessRule::FixedDecay { c: 1.0, rho: 0.1 };
        let report = solve(&scalar_problem(), at(1.0), &rule, &StopCriteria::default()).unwrap();
        assert!(report.converged());
        for r in &report.history[..report.history.len() - 1] {
            assert!((r.u_norm - 0.1f64.powi(r.k as i32)).abs() <= 1e-15 * r.u_norm.max(1.0));
        }
    }

    #[test]
    fn proximity_rules_respect_their_bounds() {
        let reference = at(2f64.sqrt());
        for rule in [
            InexactnessRule::ProximityLinear { iota: 0.1, reference: reference.clone() },
            InexactnessRule::ProximityQuadratic { iota: 0.1, reference: reference.clone() },
            InexactnessRule::RelativeBall {
                forcing: ForcingSequence::Geometric { initial: 0.5, ratio: 0.5 },
                extreme: true,
            },
        ] {
            let report = solve(&scalar_problem(), at(1.0), &rule, &StopCriteria::default()).unwrap();
            assert!(report.converged(), "{}", rule.name());
            for r in &report.history[..report.history.len() - 1] {
                let norm_f = r.residual;
                let (bound, strict) = rule.bound(r.k, 1, norm_f, r.dist_to_reference);
                if strict && bound > 0.0 {
                    assert!(r.u_norm < bound);
                } else {
                    assert!(r.u_norm <= bound * (1.0 + 1e-15));
                }
            }
        }
    }

    #[test]
    fn cone_problems_are_rejected() {
        let mut p = scalar_problem();
        p.set_part = SetValuedPart::NegOrthantCone { inequalities: 1 };
        assert!(solve(&p, at(1.0), &InexactnessRule::Exact, &StopCriteria::default()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let report = solve(&scalar_problem(), at(1.0), &InexactnessRule::Exact, &StopCriteria::default()).unwrap();
        let mut buf = Vec::new();
        write_history_csv(&report.history, &mut buf).unwrap();
        let rows = read_history_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows.len(), report.history.len());
        for (row, rec) in rows.iter().zip(&report.history) {
            assert_eq!(row[1], rec.norm_phi);
            assert_eq!(row[4], rec.residual);
            assert_eq!(row[7], rec.dist_to_final);
        }
    }

    #[test]
    fn matches_a_standalone_riemannian_newton_step() {
        // f = grad of h(p) = ⟨a, p⟩ on S³ through the global frame
        let a = DMatrix::from_column_slice(4, 1, &[0.3, -1.0, 0.2, 0.5]);
        let field = crate::geneq::GradientField(Arc::new(LinearHeight(a)));
        let problem =
            crate::geneq::reduce_vector_field(Arc::new(field), crate::geneq::FieldInclusion::Zero, FrameField::s3())
                .unwrap();
        let x = ProductPoint::plain(ManifoldPoint::sphere_normalized(&[0.1, -0.6, 0.3, 0.6]).unwrap());
        let value = problem.value(&x).unwrap();
        let (next, _) = newton_step(&problem, &x, &value, &DVector::zeros(3)).unwrap();
        let j = differential_matrix(&problem, &x).unwrap();
        let alpha = -j.try_inverse().unwrap() * &value;
        let v = combine_frame(&problem.frame, &x.point, alpha.as_slice()).unwrap();
        let expected = exp_map(&x.point, &v).unwrap();
        assert!(next.point.approx_eq(&expected, 1e-12));
    }

    struct LinearHeight(DMatrix<f64>);

    impl crate::geneq::ScalarField for LinearHeight {
        fn chart(&self) -> Chart {
            Chart::Sphere(3)
        }
        fn value(&self, p: &ManifoldPoint) -> Result<f64> {
            Ok(self.0.dot(p.coords()))
        }
        fn gradient(&self, p: &ManifoldPoint) -> Result<TangentVector> {
            TangentVector::project(p.clone(), self.0.clone())
        }
    }
}
