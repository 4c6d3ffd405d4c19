//! Generalized equations `f(p) + F(p) ∋ 0`.
//!
//! The single-valued part is any [`SmoothMap`] into `ℝᵐ`, evaluated on a
//! product `M × ℝᵏ` whose second factor carries multipliers (empty for plain
//! problems). Its differential is read off through an orthonormal frame, so
//! the Newton subproblem is always posed in `ℝⁿ⁺ᵏ` coordinates.

mod fields;
mod karcher;

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use fields::{
    fd_frame_gradients, reduce_vector_field, FieldInclusion, GradientField, LagrangianField, ScalarField,
    SquaredDistanceSum, VectorField,
};
pub use karcher::build_constrained_karcher;

use crate::error::{Error, Result};
use crate::manifold::{dist, frame_at, Chart, FrameField, ManifoldPoint, TangentVector};

/// A point of the product manifold `M × ℝᵏ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub point: ManifoldPoint,
    pub multipliers: Vec<f64>,
}

impl ProductPoint {
    pub fn new(point: ManifoldPoint, multipliers: Vec<f64>) -> Self {
        ProductPoint { point, multipliers }
    }

    /// A point without multipliers.
    pub fn plain(point: ManifoldPoint) -> Self {
        ProductPoint { point, multipliers: Vec::new() }
    }
}

/// Product distance `(d(p, q)² + ‖μ − λ‖²)^{1/2}`.
pub fn product_dist(a: &ProductPoint, b: &ProductPoint) -> Result<f64> {
    if a.multipliers.len() != b.multipliers.len() {
        return Err(Error::InvalidInput("multiplier dimensions differ".into()));
    }
    let d = dist(&a.point, &b.point)?;
    let m: f64 = a.multipliers.iter().zip(&b.multipliers).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((d * d + m).sqrt())
}

/// The single-valued part `f : M × ℝᵏ → ℝᵐ`.
pub trait SmoothMap: Send + Sync {
    fn chart(&self) -> Chart;

    fn output_dim(&self) -> usize;

    fn multiplier_dim(&self) -> usize {
        0
    }

    fn value(&self, x: &ProductPoint) -> Result<DVector<f64>>;

    /// Riemannian gradients `grad_p f_i(p, μ)`, one per output component.
    fn gradients(&self, x: &ProductPoint) -> Result<Vec<TangentVector>>;

    /// Partial derivatives `∂f_i/∂μ_l` as an `m × k` matrix.
    fn multiplier_jacobian(&self, _x: &ProductPoint) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(self.output_dim(), self.multiplier_dim()))
    }
}

type ValueFn = dyn Fn(&ManifoldPoint) -> Result<DVector<f64>> + Send + Sync;
type GradFn = dyn Fn(&ManifoldPoint) -> Result<Vec<TangentVector>> + Send + Sync;

/// A multiplier-free [`SmoothMap`] assembled from closures.
pub struct ClosureMap {
    chart: Chart,
    output_dim: usize,
    value: Box<ValueFn>,
    gradients: Box<GradFn>,
}

impl ClosureMap {
    pub fn new(
        chart: Chart,
        output_dim: usize,
        value: impl Fn(&ManifoldPoint) -> Result<DVector<f64>> + Send + Sync + 'static,
        gradients: impl Fn(&ManifoldPoint) -> Result<Vec<TangentVector>> + Send + Sync + 'static,
    ) -> Self {
        ClosureMap { chart, output_dim, value: Box::new(value), gradients: Box::new(gradients) }
    }
}

impl SmoothMap for ClosureMap {
    fn chart(&self) -> Chart {
        self.chart
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn value(&self, x: &ProductPoint) -> Result<DVector<f64>> {
        (self.value)(&x.point)
    }

    fn gradients(&self, x: &ProductPoint) -> Result<Vec<TangentVector>> {
        (self.gradients)(&x.point)
    }
}

/// Structured set-valued parts `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum SetValuedPart {
    /// `F(p) = {0}`.
    Zero,
    /// `F ≡ ℝ₊ˢ × {0}^{m−s}`: the first `inequalities` components encode
    /// `f_i(p) ≤ 0`, the rest equalities.
    NegOrthantCone { inequalities: usize },
    /// `F(p, μ) = {0} × {y ≥ 0 : Σ μ_l y_l = 0} × {0}` for `μ ≥ 0`, empty
    /// otherwise. Multiplier `l` pairs with output component `slots.start + l`.
    KktComplementarity { slots: Range<usize> },
}

impl SetValuedPart {
    pub fn slots(&self) -> Range<usize> {
        match self {
            SetValuedPart::KktComplementarity { slots } => slots.clone(),
            _ => 0..0,
        }
    }
}

/// A generalized equation together with the frame used to coordinatize it.
#[derive(Clone)]
pub struct GenEqProblem {
    pub map: Arc<dyn SmoothMap>,
    pub set_part: SetValuedPart,
    pub frame: FrameField,
    /// Known solution, used by rate studies and proximity rules.
    pub solution: Option<ProductPoint>,
    /// Radius of the region `Ω` as a metric ball, if one is tracked.
    pub region_radius: Option<f64>,
    /// Non-fatal issues found while building the problem.
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for GenEqProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenEqProblem")
            .field("chart", &self.map.chart())
            .field("output_dim", &self.map.output_dim())
            .field("set_part", &self.set_part)
            .field("frame", &self.frame.name())
            .finish()
    }
}

impl GenEqProblem {
    pub fn new(map: Arc<dyn SmoothMap>, set_part: SetValuedPart, frame: FrameField) -> Result<Self> {
        let m = map.output_dim();
        let k = map.multiplier_dim();
        match &set_part {
            SetValuedPart::Zero if k != 0 => {
                return Err(Error::Unsupported("multipliers without a complementarity part".into()))
            }
            SetValuedPart::NegOrthantCone { inequalities } if *inequalities > m || k != 0 => {
                return Err(Error::InvalidInput("cone does not fit the output dimension".into()))
            }
            SetValuedPart::KktComplementarity { slots } if slots.end > m || slots.len() != k => {
                return Err(Error::InvalidInput(format!(
                    "{} complementarity slots in [{}, {}) for {k} multipliers and {m} outputs",
                    slots.len(),
                    slots.start,
                    slots.end
                )))
            }
            _ => {}
        }
        Ok(GenEqProblem { map, set_part, frame, solution: None, region_radius: None, warnings: Vec::new() })
    }

    pub fn with_solution(mut self, solution: ProductPoint) -> Self {
        self.solution = Some(solution);
        self
    }

    pub fn chart(&self) -> Chart {
        self.map.chart()
    }

    pub fn output_dim(&self) -> usize {
        self.map.output_dim()
    }

    pub fn multiplier_dim(&self) -> usize {
        self.map.multiplier_dim()
    }

    /// Total number of Newton unknowns: frame coefficients plus multipliers.
    pub fn step_dim(&self) -> usize {
        self.chart().dim() + self.multiplier_dim()
    }

    pub fn value(&self, x: &ProductPoint) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.map.value(x)
    }

    /// `‖Φ‖`: the norm of the components outside the complementarity slots.
    pub fn norm_phi(&self, value: &DVector<f64>) -> f64 {
        let slots = self.set_part.slots();
        value.iter().enumerate().filter(|(i, _)| !slots.contains(i)).map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Largest constraint value over the complementarity slots (0 if none).
    pub fn constraint_value(&self, value: &DVector<f64>) -> f64 {
        let slots = self.set_part.slots();
        if slots.is_empty() {
            return 0.0;
        }
        slots.map(|i| value[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_point(&self, x: &ProductPoint) -> Result<()> {
        if x.point.chart() != self.chart() {
            return Err(Error::ChartMismatch { expected: self.chart(), found: x.point.chart() });
        }
        if x.multipliers.len() != self.multiplier_dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} multipliers, got {}",
                self.multiplier_dim(),
                x.multipliers.len()
            )));
        }
        Ok(())
    }
}

/// Frame representation of the differential: an `m × (n + k)` matrix whose
/// first `n` columns are `⟨grad f_i(p), E_j(p)⟩` and whose last `k` columns
/// are the multiplier partials.
pub fn differential_matrix(problem: &GenEqProblem, x: &ProductPoint) -> Result<DMatrix<f64>> {
    problem.check_point(x)?;
    let basis = frame_at(&problem.frame, &x.point)?;
    let grads = problem.map.gradients(x)?;
    let m = problem.output_dim();
    let n = basis.len();
    let k = problem.multiplier_dim();
    if grads.len() != m {
        return Err(Error::InvalidInput(format!("{} gradients for {m} outputs", grads.len())));
    }
    let mut j = DMatrix::zeros(m, n + k);
    for (i, g) in grads.iter().enumerate() {
        for (c, e) in basis.iter().enumerate() {
            j[(i, c)] = g.inner(e)?;
        }
    }
    if k > 0 {
        let mj = problem.map.multiplier_jacobian(x)?;
        j.view_mut((0, n), (m, k)).copy_from(&mj);
    }
    Ok(j)
}

/// `d_e(0, f(p) + F(p))`.
///
/// Fails with [`Error::InfeasibleMultiplier`] when `F(p)` is empty.
pub fn residual(problem: &GenEqProblem, x: &ProductPoint) -> Result<f64> {
    let value = problem.value(x)?;
    residual_from_value(problem, x, &value)
}

pub(crate) fn residual_from_value(problem: &GenEqProblem, x: &ProductPoint, value: &DVector<f64>) -> Result<f64> {
    let sq: f64 = match &problem.set_part {
        SetValuedPart::Zero => value.norm_squared(),
        SetValuedPart::NegOrthantCone { inequalities } => {
            value.iter().enumerate().map(|(i, v)| if i < *inequalities { v.max(0.0).powi(2) } else { v * v }).sum()
        }
        SetValuedPart::KktComplementarity { slots } => {
            if let Some((slot, &mu)) = x.multipliers.iter().enumerate().find(|(_, mu)| !(**mu >= 0.0)) {
                return Err(Error::InfeasibleMultiplier { slot, value: mu });
            }
            value
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if slots.contains(&i) {
                        let mu = x.multipliers[i - slots.start];
                        if mu > 0.0 {
                            v * v
                        } else {
                            v.max(0.0).powi(2)
                        }
                    } else {
                        v * v
                    }
                })
                .sum()
        }
    };
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid_map(m: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Arc<dyn SmoothMap> {
        let f = Arc::new(f);
        let g = f.clone();
        Arc::new(ClosureMap::new(
            Chart::Euclid(2),
            m,
            move |p| Ok(DVector::from_vec(f(p.coords().as_slice()))),
            move |p| {
                let n = p.coords().len();
                // central differences are exact for the affine maps used below
                let base = g(p.coords().as_slice());
                (0..base.len())
                    .map(|i| {
                        let comps: Vec<f64> = (0..n)
                            .map(|j| {
                                let mut a = p.coords().as_slice().to_vec();
                                let mut b = a.clone();
                                a[j] += 0.5;
                                b[j] -= 0.5;
                                g(&a)[i] - g(&b)[i]
                            })
                            .collect();
                        TangentVector::from_slice(p.clone(), &comps)
                    })
                    .collect()
            },
        ))
    }

    fn kkt_problem() -> GenEqProblem {
        let map = Arc::new(ClosureMapWithMu);
        GenEqProblem::new(map, SetValuedPart::KktComplementarity { slots: 1..2 }, FrameField::Canonical).unwrap()
    }

    /// `f(p, μ) = (p₀ + μ, p₁)` on `ℝ² × ℝ` with slot 1.
    struct ClosureMapWithMu;

    impl SmoothMap for ClosureMapWithMu {
        fn chart(&self) -> Chart {
            Chart::Euclid(2)
        }
        fn output_dim(&self) -> usize {
            2
        }
        fn multiplier_dim(&self) -> usize {
            1
        }
        fn value(&self, x: &ProductPoint) -> Result<DVector<f64>> {
            let c = x.point.coords();
            Ok(DVector::from_vec(vec![c[0] + x.multipliers[0], c[1]]))
        }
        fn gradients(&self, x: &ProductPoint) -> Result<Vec<TangentVector>> {
            Ok(vec![
                TangentVector::from_slice(x.point.clone(), &[1.0, 0.0])?,
                TangentVector::from_slice(x.point.clone(), &[0.0, 1.0])?,
            ])
        }
        fn multiplier_jacobian(&self, _x: &ProductPoint) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(2, 1, &[1.0, 0.0]))
        }
    }

    #[test]
    fn constant_map_has_zero_differential() {
        let p =
            GenEqProblem::new(euclid_map(2, |_| vec![3.0, -1.0]), SetValuedPart::Zero, FrameField::Canonical).unwrap();
        let x = ProductPoint::plain(ManifoldPoint::euclid(&[0.4, 2.0]));
        assert_eq!(differential_matrix(&p, &x).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn identity_map_has_identity_differential() {
        let p = GenEqProblem::new(euclid_map(2, |x| x.to_vec()), SetValuedPart::Zero, FrameField::Canonical).unwrap();
        let x = ProductPoint::plain(ManifoldPoint::euclid(&[0.4, 2.0]));
        assert_eq!(differential_matrix(&p, &x).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn zero_variant_residual_is_euclidean_norm() {
        let p =
            GenEqProblem::new(euclid_map(2, |_| vec![3.0, 4.0]), SetValuedPart::Zero, FrameField::Canonical).unwrap();
        let x = ProductPoint::plain(ManifoldPoint::euclid(&[0.0, 0.0]));
        assert_eq!(residual(&p, &x).unwrap(), 5.0);
    }

    #[test]
    fn cone_residual_ignores_satisfied_inequalities() {
        let p = GenEqProblem::new(
            euclid_map(3, |_| vec![-2.0, 0.5, -0.3]),
            SetValuedPart::NegOrthantCone { inequalities: 2 },
            FrameField::Canonical,
        )
        .unwrap();
        let x = ProductPoint::plain(ManifoldPoint::euclid(&[0.0, 0.0]));
        assert!((residual(&p, &x).unwrap() - (0.25f64 + 0.09).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kkt_slot_residuals() {
        let p = kkt_problem();
        let at = |mu: f64| ProductPoint::new(ManifoldPoint::euclid(&[-mu, -0.3]), vec![mu]);
        assert_eq!(residual(&p, &at(0.0)).unwrap(), 0.0);
        assert!((residual(&p, &at(0.5)).unwrap() - 0.3).abs() < 1e-15);

        // brute force over y ∈ F: with μ = 0.5 only y = 0 is admissible
        let slot = -0.3f64;
        let best_free = (0..=1000).map(|i| (slot + i as f64 * 1e-3).abs()).fold(f64::INFINITY, f64::min);
        assert!(best_free < 1e-12);

        assert!(matches!(residual(&p, &at(-0.1)), Err(Error::InfeasibleMultiplier { slot: 0, .. })));
    }

    #[test]
    fn kkt_differential_carries_multiplier_columns() {
        let p = kkt_problem();
        let x = ProductPoint::new(ManifoldPoint::euclid(&[0.0, 0.0]), vec![1.0]);
        let j = differential_matrix(&p, &x).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]));
        assert_eq!(p.norm_phi(&DVector::from_vec(vec![3.0, 7.0])), 3.0);
        assert_eq!(p.constraint_value(&DVector::from_vec(vec![3.0, 7.0])), 7.0);
    }

    #[test]
    fn inconsistent_slots_are_rejected() {
        let map = Arc::new(ClosureMapWithMu);
        assert!(GenEqProblem::new(map.clone(), SetValuedPart::Zero, FrameField::Canonical).is_err());
        assert!(
            GenEqProblem::new(map, SetValuedPart::KktComplementarity { slots: 1..3 }, FrameField::Canonical).is_err()
        );
    }

    #[test]
    fn product_distance_combines_factors() {
        let a = ProductPoint::new(ManifoldPoint::euclid(&[0.0, 0.0]), vec![1.0]);
        let b = ProductPoint::new(ManifoldPoint::euclid(&[3.0, 0.0]), vec![5.0]);
        assert_eq!(product_dist(&a, &b).unwrap(), 5.0);
    }
}
