//! Scalar and vector fields, and the reduction of a vector-field inclusion
//! `V(p) + Z(p) ∋ 0_p` to a generalized equation in `ℝᵐ` through a frame.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{GenEqProblem, ProductPoint, SetValuedPart, SmoothMap};
use crate::error::{Error, Result};
use crate::manifold::{exp_map, frame_at, log_map, Chart, FrameField, ManifoldPoint, TangentVector};

/// Step for central finite differences along frame directions.
pub const FD_STEP: f64 = 1e-6;

pub trait ScalarField: Send + Sync {
    fn chart(&self) -> Chart;

    fn value(&self, p: &ManifoldPoint) -> Result<f64>;

    fn gradient(&self, p: &ManifoldPoint) -> Result<TangentVector>;

    /// Gradients of `p ↦ ⟨grad h(p), E_j(p)⟩`, one per frame vector.
    fn frame_gradients(&self, p: &ManifoldPoint, frame: &FrameField) -> Result<Vec<TangentVector>> {
        fd_frame_gradients(p, frame, |q| {
            let g = self.gradient(q)?;
            frame_at(frame, q)?.iter().map(|e| g.inner(e)).collect()
        })
    }
}

/// Gradients of the components of `φ : M → ℝⁿ` by central differences of
/// `t ↦ φ(exp_p(t E_k(p)))`.
pub fn fd_frame_gradients(
    p: &ManifoldPoint,
    frame: &FrameField,
    phi: impl Fn(&ManifoldPoint) -> Result<Vec<f64>>,
) -> Result<Vec<TangentVector>> {
    let basis = frame_at(frame, p)?;
    let mut partials: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for e in &basis {
        let plus = phi(&exp_map(p, &e.scale(FD_STEP))?)?;
        let minus = phi(&exp_map(p, &e.scale(-FD_STEP))?)?;
        partials.push(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).collect());
    }
    let outputs = partials.first().map_or(0, Vec::len);
    (0..outputs)
        .map(|i| {
            let mut acc = TangentVector::zero(p.clone());
            for (k, e) in basis.iter().enumerate() {
                acc = acc.add(&e.scale(partials[k][i]))?;
            }
            Ok(acc)
        })
        .collect()
}

/// `h(p) = Σ wᵢ d²(p, qᵢ) + offset`, with `grad h(p) = −2 Σ wᵢ log_p qᵢ`.
///
/// Covers both the Karcher objective (`wᵢ = 1/N`) and the ball constraint
/// `d²(p, p̃) − r²`.
#[derive(Debug, Clone)]
pub struct SquaredDistanceSum {
    chart: Chart,
    points: Vec<ManifoldPoint>,
    weights: Vec<f64>,
    offset: f64,
}

impl SquaredDistanceSum {
    pub fn new(points: Vec<ManifoldPoint>, weights: Vec<f64>, offset: f64) -> Result<Self> {
        let chart = points.first().ok_or_else(|| Error::InvalidInput("no points".into()))?.chart();
        if points.iter().any(|p| p.chart() != chart) {
            return Err(Error::InvalidInput("points live on different charts".into()));
        }
        if weights.len() != points.len() {
            return Err(Error::InvalidInput("one weight per point is required".into()));
        }
        Ok(SquaredDistanceSum { chart, points, weights, offset })
    }

    /// `(1/N) Σ d²(p, pⁱ)`.
    pub fn mean_of(points: Vec<ManifoldPoint>) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        let n = points.len();
        Self::new(points, vec![w; n], 0.0)
    }

    pub fn points(&self) -> &[ManifoldPoint] {
        &self.points
    }

    fn sphere_frame_gradients(&self, p: &ManifoldPoint, generators: &[DMatrix<f64>]) -> Result<Vec<TangentVector>> {
        // On S^n with E_j(p) = M_j p (M_j skew), ⟨log_p q, M_j p⟩ = φ(⟨p,q⟩)⟨q, M_j p⟩
        // with φ(c) = θ/sin θ. Differentiate that ambient extension and project.
        let x = p.coords();
        let mut out = vec![DMatrix::zeros(x.nrows(), 1); generators.len()];
        for (q, w) in self.points.iter().zip(&self.weights) {
            let q = q.coords();
            let c = x.dot(q);
            let s = (q - x * c).norm();
            let theta = s.atan2(c);
            let (phi, dphi) = if theta < 1e-2 {
                let t2 = theta * theta;
                (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0, -(1.0 / 3.0 + 2.0 * t2 / 15.0 + 2.0 * t2 * t2 / 63.0))
            } else {
                let st = theta.sin();
                (theta / st, -(st - theta * theta.cos()) / (st * st * st))
            };
            for (m, acc) in generators.iter().zip(out.iter_mut()) {
                let mq = m * q;
                let qmx = q.dot(&(m * x));
                // ∇[φ(c)⟨q, M x⟩] = φ'(c)⟨q, M x⟩ q + φ(c) Mᵀ q, Mᵀ = −M
                *acc += (q * (dphi * qmx) - mq * phi) * (-2.0 * w);
            }
        }
        out.into_iter().map(|g| TangentVector::project(p.clone(), g)).collect()
    }
}

impl ScalarField for SquaredDistanceSum {
    fn chart(&self) -> Chart {
        self.chart
    }

    fn value(&self, p: &ManifoldPoint) -> Result<f64> {
        let mut acc = self.offset;
        for (q, w) in self.points.iter().zip(&self.weights) {
            let d = crate::manifold::dist(p, q)?;
            acc += w * d * d;
        }
        Ok(acc)
    }

    fn gradient(&self, p: &ManifoldPoint) -> Result<TangentVector> {
        let mut acc = TangentVector::zero(p.clone());
        for (q, w) in self.points.iter().zip(&self.weights) {
            acc = acc.add(&log_map(p, q)?.scale(-2.0 * w))?;
        }
        Ok(acc)
    }

    fn frame_gradients(&self, p: &ManifoldPoint, frame: &FrameField) -> Result<Vec<TangentVector>> {
        match (frame, p.chart()) {
            (FrameField::SphereGlobal { generators }, Chart::Sphere(n)) if generators.len() == n => {
                self.sphere_frame_gradients(p, generators)
            }
            (FrameField::Canonical, Chart::Euclid(n)) => {
                let total: f64 = self.weights.iter().sum();
                (0..n)
                    .map(|j| {
                        let mut c = DMatrix::zeros(n, 1);
                        c[(j, 0)] = 2.0 * total;
                        TangentVector::new(p.clone(), c)
                    })
                    .collect()
            }
            _ => fd_frame_gradients(p, frame, |q| {
                let g = self.gradient(q)?;
                frame_at(frame, q)?.iter().map(|e| g.inner(e)).collect()
            }),
        }
    }
}

/// A (possibly multiplier-dependent) tangent vector field `V(p, μ)`.
pub trait VectorField: Send + Sync {
    fn chart(&self) -> Chart;

    fn multiplier_dim(&self) -> usize {
        0
    }

    fn value(&self, x: &ProductPoint) -> Result<TangentVector>;

    /// Gradients in `p` of `⟨V(p, μ), E_j(p)⟩`, one per frame vector.
    fn frame_gradients(&self, x: &ProductPoint, frame: &FrameField) -> Result<Vec<TangentVector>> {
        fd_frame_gradients(&x.point, frame, |q| {
            let v = self.value(&ProductPoint::new(q.clone(), x.multipliers.clone()))?;
            frame_at(frame, q)?.iter().map(|e| v.inner(e)).collect()
        })
    }

    /// `∂⟨V, E_j⟩/∂μ_l` as an `n × k` matrix.
    fn multiplier_columns(&self, x: &ProductPoint, frame: &FrameField) -> Result<DMatrix<f64>> {
        let basis = frame_at(frame, &x.point)?;
        let k = self.multiplier_dim();
        let mut out = DMatrix::zeros(basis.len(), k);
        for l in 0..k {
            let mut up = x.clone();
            let mut down = x.clone();
            up.multipliers[l] += FD_STEP;
            down.multipliers[l] -= FD_STEP;
            let dv = self.value(&up)?.sub(&self.value(&down)?)?;
            for (j, e) in basis.iter().enumerate() {
                out[(j, l)] = dv.inner(e)? / (2.0 * FD_STEP);
            }
        }
        Ok(out)
    }
}

/// `V = grad h`.
pub struct GradientField(pub Arc<dyn ScalarField>);

impl VectorField for GradientField {
    fn chart(&self) -> Chart {
        self.0.chart()
    }

    fn value(&self, x: &ProductPoint) -> Result<TangentVector> {
        self.0.gradient(&x.point)
    }

    fn frame_gradients(&self, x: &ProductPoint, frame: &FrameField) -> Result<Vec<TangentVector>> {
        self.0.frame_gradients(&x.point, frame)
    }
}

/// `grad L_μ = grad f + Σ μ_l grad g_l`.
pub struct LagrangianField {
    pub objective: Arc<dyn ScalarField>,
    pub constraints: Vec<Arc<dyn ScalarField>>,
}

impl VectorField for LagrangianField {
    fn chart(&self) -> Chart {
        self.objective.chart()
    }

    fn multiplier_dim(&self) -> usize {
        self.constraints.len()
    }

    fn value(&self, x: &ProductPoint) -> Result<TangentVector> {
        let mut acc = self.objective.gradient(&x.point)?;
        for (g, mu) in self.constraints.iter().zip(&x.multipliers) {
            acc = acc.add(&g.gradient(&x.point)?.scale(*mu))?;
        }
        Ok(acc)
    }

    fn frame_gradients(&self, x: &ProductPoint, frame: &FrameField) -> Result<Vec<TangentVector>> {
        let mut acc = self.objective.frame_gradients(&x.point, frame)?;
        for (g, mu) in self.constraints.iter().zip(&x.multipliers) {
            for (a, b) in acc.iter_mut().zip(g.frame_gradients(&x.point, frame)?) {
                *a = a.add(&b.scale(*mu))?;
            }
        }
        Ok(acc)
    }

    fn multiplier_columns(&self, x: &ProductPoint, frame: &FrameField) -> Result<DMatrix<f64>> {
        let basis = frame_at(frame, &x.point)?;
        let mut out = DMatrix::zeros(basis.len(), self.constraints.len());
        for (l, g) in self.constraints.iter().enumerate() {
            let grad = g.gradient(&x.point)?;
            for (j, e) in basis.iter().enumerate() {
                out[(j, l)] = grad.inner(e)?;
            }
        }
        Ok(out)
    }
}

/// Structured set-valued vector fields `Z` accepted by the reduction.
pub enum FieldInclusion {
    /// `Z ≡ 0_p`.
    Zero,
    /// KKT structure: the tangent part of `Z` vanishes and the constraints
    /// `g_l(p) ≤ 0` pair with the field's multipliers through complementarity.
    Kkt { constraints: Vec<Arc<dyn ScalarField>> },
}

/// `f(p, μ) = (⟨V, E_1⟩, …, ⟨V, E_n⟩, g_1(p), …, g_k(p))`.
struct ReducedField {
    field: Arc<dyn VectorField>,
    constraints: Vec<Arc<dyn ScalarField>>,
    frame: FrameField,
}

impl SmoothMap for ReducedField {
    fn chart(&self) -> Chart {
        self.field.chart()
    }

    fn output_dim(&self) -> usize {
        self.field.chart().dim() + self.constraints.len()
    }

    fn multiplier_dim(&self) -> usize {
        self.field.multiplier_dim()
    }

    fn value(&self, x: &ProductPoint) -> Result<DVector<f64>> {
        let v = self.field.value(x)?;
        let mut out: Vec<f64> = frame_at(&self.frame, &x.point)?.iter().map(|e| v.inner(e)).collect::<Result<_>>()?;
        for g in &self.constraints {
            out.push(g.value(&x.point)?);
        }
        Ok(DVector::from_vec(out))
    }

    fn gradients(&self, x: &ProductPoint) -> Result<Vec<TangentVector>> {
        let mut out = self.field.frame_gradients(x, &self.frame)?;
        for g in &self.constraints {
            out.push(g.gradient(&x.point)?);
        }
        Ok(out)
    }

    fn multiplier_jacobian(&self, x: &ProductPoint) -> Result<DMatrix<f64>> {
        let cols = self.field.multiplier_columns(x, &self.frame)?;
        let n = cols.nrows();
        let mut out = DMatrix::zeros(n + self.constraints.len(), self.multiplier_dim());
        out.view_mut((0, 0), (n, cols.ncols())).copy_from(&cols);
        Ok(out)
    }
}

/// Reduces `V(p) + Z(p) ∋ 0_p` to `f(p) + F(p) ∋ 0` in `ℝᵐ` through the frame:
/// a point is a singularity of `V + Z` exactly when the reduced residual
/// vanishes.
pub fn reduce_vector_field(
    field: Arc<dyn VectorField>,
    inclusion: FieldInclusion,
    frame: FrameField,
) -> Result<GenEqProblem> {
    let chart = field.chart();
    frame_at(&frame, &probe_point(chart)?)?;
    let (constraints, set_part) = match inclusion {
        FieldInclusion::Zero => {
            if field.multiplier_dim() != 0 {
                return Err(Error::Unsupported("multiplier-dependent field with Z = 0".into()));
            }
            (Vec::new(), SetValuedPart::Zero)
        }
        FieldInclusion::Kkt { constraints } => {
            if constraints.len() != field.multiplier_dim() || constraints.is_empty() {
                return Err(Error::Unsupported(format!(
                    "{} constraints for a field with {} multipliers",
                    constraints.len(),
                    field.multiplier_dim()
                )));
            }
            if constraints.iter().any(|g| g.chart() != chart) {
                return Err(Error::Unsupported("constraints on a different chart".into()));
            }
            let n = chart.dim();
            let k = constraints.len();
            (constraints, SetValuedPart::KktComplementarity { slots: n..n + k })
        }
    };
    let map = ReducedField { field, constraints, frame: frame.clone() };
    GenEqProblem::new(Arc::new(map), set_part, frame)
}

/// Some valid point of the chart, used to check that a frame applies.
fn probe_point(chart: Chart) -> Result<ManifoldPoint> {
    let (r, c) = chart.coord_shape();
    match chart {
        Chart::Sphere(_) => {
            let mut v = vec![0.0; r];
            v[r - 1] = 1.0;
            ManifoldPoint::sphere(&v)
        }
        Chart::Spd(n) => ManifoldPoint::spd_scaled_identity(n, 1.0),
        Chart::Euclid(_) => Ok(ManifoldPoint::euclid(&vec![0.0; r * c])),
    }
}
