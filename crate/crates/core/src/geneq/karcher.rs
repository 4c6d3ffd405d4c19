use std::sync::Arc;

use super::fields::{reduce_vector_field, FieldInclusion, LagrangianField, ScalarField, SquaredDistanceSum};
use super::GenEqProblem;
use crate::error::{Error, Result};
use crate::manifold::{dist, Chart, FrameField, ManifoldPoint};

/// KKT system of the constrained Riemannian center of mass on `S³`:
///
/// ```text
/// minimize (1/N) Σ d²(p, pⁱ)   subject to   d²(p, p̃) − r² ≤ 0
/// ```
///
/// posed on `S³ × ℝ` as `f(p, μ) = (⟨grad L_μ(p), E_j(p)⟩_{j=1..3}, g(p))`
/// with the complementarity part on the last component.
///
/// Sample points outside the constraint ball are allowed and reported as
/// warnings on the returned problem.
pub fn build_constrained_karcher(
    points: &[ManifoldPoint],
    center: &ManifoldPoint,
    radius: f64,
) -> Result<GenEqProblem> {
    if points.is_empty() {
        return Err(Error::InvalidInput("at least one sample point is required".into()));
    }
    if center.chart() != Chart::Sphere(3) {
        return Err(Error::ChartMismatch { expected: Chart::Sphere(3), found: center.chart() });
    }
    if !(radius > 0.0) || radius >= std::f64::consts::PI {
        return Err(Error::InvalidInput(format!("radius {radius} outside (0, π)")));
    }
    let mut warnings = Vec::new();
    let outside =
        points.iter().map(|p| dist(p, center)).collect::<Result<Vec<_>>>()?.into_iter().filter(|d| *d > radius).count();
    if outside > 0 {
        warnings.push(format!("{outside} of {} sample points lie outside the constraint ball", points.len()));
    }

    let objective: Arc<dyn ScalarField> = Arc::new(SquaredDistanceSum::mean_of(points.to_vec())?);
    let constraint: Arc<dyn ScalarField> =
        Arc::new(SquaredDistanceSum::new(vec![center.clone()], vec![1.0], -radius * radius)?);
    let field = LagrangianField { objective, constraints: vec![constraint.clone()] };
    let mut problem =
        reduce_vector_field(Arc::new(field), FieldInclusion::Kkt { constraints: vec![constraint] }, FrameField::s3())?;
    problem.region_radius = Some(radius);
    problem.warnings = warnings;
    Ok(problem)
}
