//! Sampled verification of metric regularity for trace-based maps on the
//! SPD cone.
//!
//! Each map comes with an explicit preimage witness `w(x, q)`, and the probe
//! checks `d(q, w(x, q)) ≤ σ · d_e(x, Φ(q))` on seeded samples. The witness
//! distance bounds `d(q, Φ⁻¹(x))` from above, so passing samples certify the
//! regularity inequality itself.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::sqrtm;
use crate::manifold::{dist, Chart, ManifoldPoint};

/// Slack added to the right-hand side of the regularity inequality.
pub const REGULARITY_SLACK: f64 = 1e-10;
/// Matrix tolerance for recognizing the special point of set-valued maps.
pub const SPECIAL_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapVariant {
    /// `ln tr p`.
    LnTr,
    /// `1 / tr p`.
    InvTr,
    /// `ln tr p`, except `{0} ∪ [1, 2]` at `Id/n`.
    LnTrSetValued,
    /// `1 / tr p`, except `{1/n} ∪ [2, 3]` at `Id`.
    InvTrSetValued,
}

impl MapVariant {
    pub const ALL: [MapVariant; 4] =
        [MapVariant::LnTr, MapVariant::InvTr, MapVariant::LnTrSetValued, MapVariant::InvTrSetValued];

    pub fn as_str(&self) -> &'static str {
        match self {
            MapVariant::LnTr => "ln_tr",
            MapVariant::InvTr => "inv_tr",
            MapVariant::LnTrSetValued => "ln_tr_set_valued",
            MapVariant::InvTrSetValued => "inv_tr_set_valued",
        }
    }

    fn is_inverse(&self) -> bool {
        matches!(self, MapVariant::InvTr | MapVariant::InvTrSetValued)
    }

    /// Scale `s` of the special point `s·Id` of a set-valued variant.
    fn special_scale(&self, n: usize) -> Option<f64> {
        match self {
            MapVariant::LnTrSetValued => Some(1.0 / n as f64),
            MapVariant::InvTrSetValued => Some(1.0),
            _ => None,
        }
    }

    fn special_value(&self, n: usize) -> PhiValue {
        match self {
            MapVariant::LnTrSetValued => PhiValue::Union { point: 0.0, interval: (1.0, 2.0) },
            _ => PhiValue::Union { point: 1.0 / n as f64, interval: (2.0, 3.0) },
        }
    }
}

impl fmt::Display for MapVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MapVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown map variant `{s}`")))
    }
}

/// Value of a map at a point: a single real or a point joined with a closed
/// interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiValue {
    Single(f64),
    Union { point: f64, interval: (f64, f64) },
}

impl PhiValue {
    /// Euclidean distance from `x` to the value set.
    pub fn distance(&self, x: f64) -> f64 {
        match *self {
            PhiValue::Single(v) => (x - v).abs(),
            PhiValue::Union { point, interval: (lo, hi) } => {
                let to_interval = if x < lo {
                    lo - x
                } else if x > hi {
                    x - hi
                } else {
                    0.0
                };
                (x - point).abs().min(to_interval)
            }
        }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.distance(x) <= tol
    }
}

fn require_spd(p: &ManifoldPoint) -> Result<usize> {
    match p.chart() {
        Chart::Spd(n) => Ok(n),
        other => Err(Error::ChartMismatch { expected: Chart::Spd(other.param()), found: other }),
    }
}

fn is_scaled_identity(p: &ManifoldPoint, scale: f64) -> bool {
    let n = p.coords().nrows();
    (p.coords() - DMatrix::identity(n, n) * scale).amax() <= SPECIAL_POINT_TOL
}

/// Evaluates the map at an SPD point.
pub fn phi_eval(variant: MapVariant, p: &ManifoldPoint) -> Result<PhiValue> {
    let n = require_spd(p)?;
    if let Some(s) = variant.special_scale(n) {
        if is_scaled_identity(p, s) {
            return Ok(variant.special_value(n));
        }
    }
    let tr = p.coords().trace();
    Ok(PhiValue::Single(if variant.is_inverse() { 1.0 / tr } else { tr.ln() }))
}

/// A point `w` with `x ∈ Φ(w)`, obtained by rescaling `q`.
pub fn preimage_witness(variant: MapVariant, x: f64, q: &ManifoldPoint) -> Result<ManifoldPoint> {
    require_spd(q)?;
    let tr = q.coords().trace();
    let scale = if variant.is_inverse() {
        if !(x > 0.0) {
            return Err(Error::InvalidInput(format!("no positive-definite preimage of {x} under 1/tr")));
        }
        1.0 / (x * tr)
    } else {
        (x - tr.ln()).exp()
    };
    ManifoldPoint::spd(q.coords() * scale)
}

/// A sampled check of the regularity inequality on a metric ball of SPD
/// points and an interval of target values.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityProbe {
    pub variant: MapVariant,
    pub sigma: f64,
    pub center: ManifoldPoint,
    pub radius: f64,
    /// Targets are drawn uniformly from `[lo, hi)`.
    pub x_range: (f64, f64),
    pub samples: usize,
    pub seed: u64,
}

impl RegularityProbe {
    /// The probe on which the variant is known to be regular: ball, target
    /// range and modulus all follow from the witness argument. `radius` is
    /// the ball radius `a` around the variant's natural center.
    pub fn certified(variant: MapVariant, n: usize, radius: f64, samples: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("matrix size must be positive".into()));
        }
        let nf = n as f64;
        let (center_scale, x_range, sigma) = match variant {
            MapVariant::LnTr => (1.0, (-1.0, 1.0), nf.sqrt()),
            MapVariant::LnTrSetValued => (1.0 / nf, (-1.0, 0.5), nf.sqrt()),
            MapVariant::InvTr => {
                (1.0, ((-radius).exp() / nf, radius.exp() / nf), nf.sqrt() * inverse_trace_lipschitz(n, radius))
            }
            MapVariant::InvTrSetValued => (
                1.0,
                ((-radius).exp() / nf, (radius.exp() / nf).min(1.0)),
                nf.sqrt() * inverse_trace_lipschitz(n, radius),
            ),
        };
        let probe = RegularityProbe {
            variant,
            sigma,
            center: ManifoldPoint::spd_scaled_identity(n, center_scale)?,
            radius,
            x_range,
            samples,
            seed,
        };
        probe.validate()?;
        Ok(probe)
    }

    pub fn n(&self) -> usize {
        self.center.chart().param()
    }

    /// Target values on which the inequality is asserted; samples outside
    /// are evaluated but not counted.
    pub fn certified_x_range(&self) -> (f64, f64) {
        let nf = self.n() as f64;
        match self.variant {
            MapVariant::LnTr => (f64::NEG_INFINITY, f64::INFINITY),
            MapVariant::LnTrSetValued => (f64::NEG_INFINITY, 0.5),
            MapVariant::InvTr => ((-self.radius).exp() / nf, self.radius.exp() / nf),
            MapVariant::InvTrSetValued => ((-self.radius).exp() / nf, (self.radius.exp() / nf).min(1.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_spd(&self.center)?;
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidInput(format!("modulus {} must be positive", self.sigma)));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidInput(format!("radius {} must be positive", self.radius)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidInput("at least one sample is required".into()));
        }
        let (lo, hi) = self.x_range;
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("empty target range [{lo}, {hi})")));
        }
        if self.variant.is_inverse() && lo <= 0.0 {
            return Err(Error::InvalidInput("targets of 1/tr must be positive".into()));
        }
        Ok(())
    }
}

/// Lipschitz constant of `ln` on the trace-reciprocal range `(e^{-a}/n, e^a/n)`.
pub fn inverse_trace_lipschitz(n: usize, radius: f64) -> f64 {
    n as f64 * radius.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub variant: MapVariant,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub samples: usize,
    pub violations: usize,
    /// Largest `d(q, w) − σ d_e(x, Φ(q))` over counted samples.
    pub worst_margin: f64,
    /// Largest `d(q, w) / (σ d_e(x, Φ(q)))` over counted samples with a
    /// nonzero denominator.
    pub tightness: f64,
    /// Samples whose target lies outside the certified range.
    pub excluded: usize,
}

impl ProbeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain numbers and strings")
    }
}

/// One evaluated sample of a probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSample {
    pub witness_distance: f64,
    pub value_distance: f64,
    pub counted: bool,
}

/// Checks the witness inequality at one pair.
pub fn probe_pair(probe: &RegularityProbe, q: &ManifoldPoint, x: f64) -> Result<ProbeSample> {
    let w = preimage_witness(probe.variant, x, q)?;
    let (lo, hi) = probe.certified_x_range();
    Ok(ProbeSample {
        witness_distance: dist(q, &w)?,
        value_distance: phi_eval(probe.variant, q)?.distance(x),
        counted: x > lo && x < hi,
    })
}

/// Runs the probe. The first sample is the ball center itself, so the
/// set-valued branch of the special-point variants is always exercised.
pub fn verify_regularity(probe: &RegularityProbe) -> Result<ProbeReport> {
    probe.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let xs = Uniform::new(probe.x_range.0, probe.x_range.1)
        .map_err(|e| Error::InvalidInput(format!("target range: {e}")))?;
    let mut report = ProbeReport {
        variant: probe.variant,
        n: probe.n(),
        sigma: probe.sigma,
        seed: probe.seed,
        samples: probe.samples,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
        tightness: 0.0,
        excluded: 0,
    };
    for i in 0..probe.samples {
        let q = if i == 0 { probe.center.clone() } else { sample_ball(&probe.center, probe.radius, &mut rng)? };
        let x = xs.sample(&mut rng);
        let s = probe_pair(probe, &q, x)?;
        if !s.counted {
            report.excluded += 1;
            continue;
        }
        let rhs = probe.sigma * s.value_distance;
        report.worst_margin = report.worst_margin.max(s.witness_distance - rhs);
        if s.witness_distance > rhs + REGULARITY_SLACK {
            report.violations += 1;
        }
        if rhs > 0.0 {
            report.tightness = report.tightness.max(s.witness_distance / rhs);
        }
    }
    Ok(report)
}

/// Haar-distributed orthogonal matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniform point of the open geodesic ball `B_radius(center)` on SPD(n):
/// random eigenframe, log-eigenvalues uniform in the Euclidean ball.
pub fn sample_ball(center: &ManifoldPoint, radius: f64, rng: &mut ChaCha8Rng) -> Result<ManifoldPoint> {
    let n = require_spd(center)?;
    let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let u: f64 = Uniform::new(0.0, 1.0).expect("unit interval").sample(rng);
    let len = radius * u.powf(1.0 / n as f64);
    let q = random_orthogonal(n, rng);
    let spectrum =
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, dir.iter().map(|v| (v / norm * len).exp())));
    let inner = &q * spectrum * q.transpose();
    let half = sqrtm(center.coords());
    ManifoldPoint::spd(&half * inner * &half)
}
