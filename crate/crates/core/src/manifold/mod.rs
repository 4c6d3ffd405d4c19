//! Geometry kernel: points, tangent vectors and the basic Riemannian maps on
//! the unit sphere `Sⁿ ⊂ ℝⁿ⁺¹`, the SPD cone with its affine-invariant metric
//! and flat Euclidean space.
//!
//! Every value is immutable once built; all maps are pure functions.

mod frame;
mod spd;
mod sphere;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use frame::{combine_frame, frame_at, frame_coordinates, FrameField};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on `‖p‖ = 1` (sphere) and on symmetry (SPD) for stored points.
pub const POINT_TOL: f64 = 1e-12;
/// Tolerance on `⟨p, v⟩ = 0` for sphere tangent vectors.
pub const TANGENT_TOL: f64 = 1e-10;
/// `⟨p, q⟩` at or below `-1 + ANTIPODAL_TOL` is treated as antipodal.
pub const ANTIPODAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    /// Unit sphere `Sⁿ` embedded in `ℝⁿ⁺¹`.
    Sphere(usize),
    /// Symmetric positive definite `n × n` matrices.
    Spd(usize),
    Euclid(usize),
}

impl Chart {
    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match *self {
            Chart::Sphere(n) | Chart::Euclid(n) => n,
            Chart::Spd(n) => n * (n + 1) / 2,
        }
    }

    /// Shape of the coordinate matrix used to store points and tangents.
    pub fn coord_shape(&self) -> (usize, usize) {
        match *self {
            Chart::Sphere(n) => (n + 1, 1),
            Chart::Spd(n) => (n, n),
            Chart::Euclid(n) => (n, 1),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Chart::Sphere(_) => "sphere",
            Chart::Spd(_) => "spd",
            Chart::Euclid(_) => "euclid",
        }
    }

    pub fn param(&self) -> usize {
        match *self {
            Chart::Sphere(n) | Chart::Spd(n) | Chart::Euclid(n) => n,
        }
    }

    fn from_tag(tag: &str, n: usize) -> Result<Self> {
        match tag {
            "sphere" => Ok(Chart::Sphere(n)),
            "spd" => Ok(Chart::Spd(n)),
            "euclid" => Ok(Chart::Euclid(n)),
            other => Err(Error::InvalidInput(format!("unknown chart tag `{other}`"))),
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.tag(), self.param())
    }
}

/// A point on one of the supported manifolds.
///
/// Sphere and Euclidean points are stored as column vectors, SPD points as
/// symmetric matrices. Serializes as `{"chart":"sphere","n":3,"coords":[...]}`
/// with SPD coordinates flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRepr", into = "PointRepr")]
pub struct ManifoldPoint {
    chart: Chart,
    coords: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct PointRepr {
    chart: String,
    n: usize,
    coords: Vec<f64>,
}

impl TryFrom<PointRepr> for ManifoldPoint {
    type Error = Error;

    fn try_from(r: PointRepr) -> Result<Self> {
        let chart = Chart::from_tag(&r.chart, r.n)?;
        let (rows, cols) = chart.coord_shape();
        if r.coords.len() != rows * cols {
            return Err(Error::InvalidPoint {
                chart,
                reason: format!("expected {} coordinates, got {}", rows * cols, r.coords.len()),
            });
        }
        ManifoldPoint::new(chart, DMatrix::from_row_slice(rows, cols, &r.coords))
    }
}

impl From<ManifoldPoint> for PointRepr {
    fn from(p: ManifoldPoint) -> Self {
        PointRepr { chart: p.chart.tag().to_string(), n: p.chart.param(), coords: p.to_flat() }
    }
}

impl ManifoldPoint {
    /// Validates the chart invariants and wraps the coordinates.
    pub fn new(chart: Chart, coords: DMatrix<f64>) -> Result<Self> {
        if coords.shape() != chart.coord_shape() {
            return Err(Error::InvalidPoint {
                chart,
                reason: format!("coordinate shape {:?} does not match", coords.shape()),
            });
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPoint { chart, reason: "non-finite coordinate".into() });
        }
        match chart {
            Chart::Sphere(_) => {
                let norm = coords.norm();
                if (norm - 1.0).abs() > POINT_TOL {
                    return Err(Error::InvalidPoint { chart, reason: format!("norm {norm} is not 1") });
                }
            }
            Chart::Spd(_) => {
                if !linalg::is_symmetric(&coords, POINT_TOL) {
                    return Err(Error::InvalidPoint { chart, reason: "matrix is not symmetric".into() });
                }
                let min = linalg::min_eigenvalue(&coords);
                if !(min > 0.0) {
                    return Err(Error::InvalidPoint {
                        chart,
                        reason: format!("smallest eigenvalue {min} is not positive"),
                    });
                }
            }
            Chart::Euclid(_) => {}
        }
        Ok(ManifoldPoint { chart, coords })
    }

    /// A sphere point from exactly-unit coordinates.
    pub fn sphere(coords: &[f64]) -> Result<Self> {
        let n = coords.len().checked_sub(1).ok_or_else(|| Error::InvalidInput("empty coordinates".into()))?;
        Self::new(Chart::Sphere(n), DMatrix::from_column_slice(n + 1, 1, coords))
    }

    /// A sphere point obtained by normalizing arbitrary nonzero coordinates.
    pub fn sphere_normalized(coords: &[f64]) -> Result<Self> {
        let n = coords.len().checked_sub(1).ok_or_else(|| Error::InvalidInput("empty coordinates".into()))?;
        let v = DMatrix::from_column_slice(n + 1, 1, coords);
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidPoint { chart: Chart::Sphere(n), reason: "cannot normalize".into() });
        }
        Self::new(Chart::Sphere(n), v / norm)
    }

    pub fn spd(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        Self::new(Chart::Spd(n), m)
    }

    /// `scale · Id` on SPD(n).
    pub fn spd_scaled_identity(n: usize, scale: f64) -> Result<Self> {
        Self::spd(DMatrix::identity(n, n) * scale)
    }

    pub fn euclid(coords: &[f64]) -> Self {
        let n = coords.len();
        ManifoldPoint { chart: Chart::Euclid(n), coords: DMatrix::from_column_slice(n, 1, coords) }
    }

    /// Re-normalizes (sphere) or re-symmetrizes (SPD) coordinates produced by
    /// a computation, then validates.
    pub(crate) fn from_computed(chart: Chart, coords: DMatrix<f64>) -> Result<Self> {
        let coords = match chart {
            Chart::Sphere(_) => {
                let n = coords.norm();
                coords / n
            }
            Chart::Spd(_) => linalg::symmetrize(&coords),
            Chart::Euclid(_) => coords,
        };
        match chart {
            Chart::Spd(_) => Self::new(chart, coords).map_err(|e| match e {
                Error::InvalidPoint { reason, .. } => Error::SingularGeometry(reason),
                other => other,
            }),
            _ => Self::new(chart, coords),
        }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// Coordinates flattened row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let (rows, cols) = self.coords.shape();
        (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|ij| self.coords[ij]).collect()
    }

    pub fn approx_eq(&self, other: &ManifoldPoint, tol: f64) -> bool {
        self.chart == other.chart && (&self.coords - &other.coords).amax() <= tol
    }

    fn ensure_chart(&self, other: &ManifoldPoint) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch { expected: self.chart, found: other.chart });
        }
        Ok(())
    }
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: ManifoldPoint,
    components: DMatrix<f64>,
}

impl TangentVector {
    /// Checks that the components lie in the tangent space at `base`.
    pub fn new(base: ManifoldPoint, components: DMatrix<f64>) -> Result<Self> {
        let chart = base.chart;
        if components.shape() != chart.coord_shape() {
            return Err(Error::InvalidInput(format!("tangent shape {:?} does not match {chart}", components.shape())));
        }
        match chart {
            Chart::Sphere(_) => {
                let dot = base.coords.dot(&components);
                if dot.abs() > TANGENT_TOL * components.norm().max(1.0) {
                    return Err(Error::InvalidInput(format!("vector is not tangent: ⟨p, v⟩ = {dot}")));
                }
            }
            Chart::Spd(_) => {
                if !linalg::is_symmetric(&components, POINT_TOL) {
                    return Err(Error::InvalidInput("SPD tangent must be symmetric".into()));
                }
            }
            Chart::Euclid(_) => {}
        }
        Ok(TangentVector { base, components })
    }

    /// Projects ambient coordinates onto the tangent space at `base`.
    pub fn project(base: ManifoldPoint, ambient: DMatrix<f64>) -> Result<Self> {
        let components = match base.chart {
            Chart::Sphere(_) => {
                let dot = base.coords.dot(&ambient);
                &ambient - &base.coords * dot
            }
            Chart::Spd(_) => linalg::symmetrize(&ambient),
            Chart::Euclid(_) => ambient,
        };
        Self::new(base, components)
    }

    pub fn zero(base: ManifoldPoint) -> Self {
        let (r, c) = base.chart.coord_shape();
        TangentVector { base, components: DMatrix::zeros(r, c) }
    }

    pub fn from_slice(base: ManifoldPoint, comps: &[f64]) -> Result<Self> {
        let (r, c) = base.chart.coord_shape();
        if comps.len() != r * c {
            return Err(Error::InvalidInput(format!("expected {} components", r * c)));
        }
        Self::new(base, DMatrix::from_row_slice(r, c, comps))
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// Riemannian inner product `⟨self, other⟩_p`.
    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        if !self.base.approx_eq(&other.base, POINT_TOL) {
            return Err(Error::BaseMismatch);
        }
        Ok(inner_at(&self.base, &self.components, &other.components))
    }

    pub fn norm(&self) -> f64 {
        inner_at(&self.base, &self.components, &self.components).max(0.0).sqrt()
    }

    pub fn scale(&self, s: f64) -> TangentVector {
        TangentVector { base: self.base.clone(), components: &self.components * s }
    }

    pub fn add(&self, other: &TangentVector) -> Result<TangentVector> {
        if !self.base.approx_eq(&other.base, POINT_TOL) {
            return Err(Error::BaseMismatch);
        }
        Ok(TangentVector { base: self.base.clone(), components: &self.components + &other.components })
    }

    pub fn sub(&self, other: &TangentVector) -> Result<TangentVector> {
        self.add(&other.scale(-1.0))
    }
}

fn inner_at(p: &ManifoldPoint, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    match p.chart {
        Chart::Sphere(_) | Chart::Euclid(_) => u.dot(v),
        Chart::Spd(_) => spd::inner(&p.coords, u, v),
    }
}

fn check_base(p: &ManifoldPoint, v: &TangentVector) -> Result<()> {
    p.ensure_chart(&v.base)?;
    if !p.approx_eq(&v.base, POINT_TOL) {
        return Err(Error::BaseMismatch);
    }
    Ok(())
}

/// Exponential map `exp_p(v)`.
///
/// On the sphere the step must be shorter than π; the result is re-normalized.
/// SPD results are re-symmetrized and fail with
/// [`Error::SingularGeometry`] if positive definiteness is lost numerically.
pub fn exp_map(p: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint> {
    check_base(p, v)?;
    let coords = match p.chart {
        Chart::Sphere(_) => sphere::exp(&p.coords, &v.components)?,
        Chart::Spd(_) => spd::exp(&p.coords, &v.components),
        Chart::Euclid(_) => &p.coords + &v.components,
    };
    ManifoldPoint::from_computed(p.chart, coords)
}

/// Logarithm `exp_p⁻¹(q)`.
pub fn log_map(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
    p.ensure_chart(q)?;
    let components = match p.chart {
        Chart::Sphere(_) => sphere::log(&p.coords, &q.coords)?,
        Chart::Spd(_) => spd::log(&p.coords, &q.coords),
        Chart::Euclid(_) => &q.coords - &p.coords,
    };
    TangentVector::project(p.clone(), components)
}

/// Riemannian distance.
pub fn dist(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
    p.ensure_chart(q)?;
    match p.chart {
        Chart::Sphere(_) => sphere::dist(&p.coords, &q.coords),
        Chart::Spd(_) => Ok(spd::dist(&p.coords, &q.coords)),
        Chart::Euclid(_) => Ok((&q.coords - &p.coords).norm()),
    }
}

/// Parallel transport of `v ∈ T_p` to `T_q` along the minimizing geodesic.
pub fn parallel_transport(p: &ManifoldPoint, q: &ManifoldPoint, v: &TangentVector) -> Result<TangentVector> {
    check_base(p, v)?;
    p.ensure_chart(q)?;
    let components = match p.chart {
        Chart::Sphere(_) => sphere::transport(&p.coords, &q.coords, &v.components)?,
        Chart::Spd(_) => spd::transport(&p.coords, &q.coords, &v.components),
        Chart::Euclid(_) => v.components.clone(),
    };
    TangentVector::project(q.clone(), components)
}

/// Point `γ(t) = exp_p(t·log_p q)` and velocity `γ̇(t)` of the geodesic from
/// `p` to `q`. The velocity is the parallel transport of `log_p q`.
pub fn geodesic(p: &ManifoldPoint, q: &ManifoldPoint, t: f64) -> Result<(ManifoldPoint, TangentVector)> {
    let v = log_map(p, q)?;
    let point = exp_map(p, &v.scale(t))?;
    let velocity = parallel_transport(p, &point, &v)?;
    Ok((point, velocity))
}
