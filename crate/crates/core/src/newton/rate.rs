use crate::error::{Error, Result};
use crate::geneq::{product_dist, ProductPoint};

use super::IterateRecord;

/// Distances at or below this floor are treated as noise and dropped.
pub const DEFAULT_RATE_FLOOR: f64 = 100.0 * f64::EPSILON;
const MIN_USABLE: usize = 5;
const QUADRATIC_ORDER: f64 = 1.8;
const LINEAR_ORDER: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateClass {
    Linear,
    Superlinear,
    Quadratic,
    Inconclusive,
}

impl RateClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateClass::Linear => "linear",
            RateClass::Superlinear => "superlinear",
            RateClass::Quadratic => "quadratic",
            RateClass::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub class: RateClass,
    /// Median of `log(d_{k+1}/d_k) / log(d_k/d_{k-1})`.
    pub order: f64,
    /// Median of `d_{k+1}/d_k`.
    pub linear_ratio: f64,
    /// Median of `d_{k+1}/d_k²`.
    pub quadratic_ratio: f64,
    /// Distances that survived the floor.
    pub used: usize,
}

impl RateEstimate {
    fn inconclusive(used: usize) -> Self {
        RateEstimate {
            class: RateClass::Inconclusive,
            order: f64::NAN,
            linear_ratio: f64::NAN,
            quadratic_ratio: f64::NAN,
            used,
        }
    }
}

/// Classifies the convergence of a run.
///
/// Without a reference the last iterate stands in for the limit and the two
/// final records are discarded, since their distances to it are dominated by
/// rounding.
pub fn estimate_rate(history: &[IterateRecord], reference: Option<&ProductPoint>) -> Result<RateEstimate> {
    let distances: Vec<f64> = match reference {
        Some(r) => history.iter().map(|rec| product_dist(&rec.point, r)).collect::<Result<_>>()?,
        None => {
            let Some(last) = history.last() else {
                return Err(Error::InsufficientData("empty history".into()));
            };
            let keep = history.len().saturating_sub(2);
            history[..keep].iter().map(|rec| product_dist(&rec.point, &last.point)).collect::<Result<_>>()?
        }
    };
    estimate_rate_from_distances(&distances, DEFAULT_RATE_FLOOR)
}

/// Classifies a sequence of errors `d_k`, ignoring entries `≤ floor`.
///
/// Returns `Inconclusive` when fewer than five distances remain, and
/// [`Error::InsufficientData`] when the input itself is shorter than that.
pub fn estimate_rate_from_distances(distances: &[f64], floor: f64) -> Result<RateEstimate> {
    if distances.len() < MIN_USABLE {
        return Err(Error::InsufficientData(format!(
            "{} distances given, at least {MIN_USABLE} needed",
            distances.len()
        )));
    }
    estimate_rate_pooled(&[distances], floor)
}

/// Classifies several error sequences of the same method at once, pooling
/// their per-step orders and ratios. Useful when each run converges too fast
/// to leave five distances above the floor on its own.
pub fn estimate_rate_pooled(sequences: &[&[f64]], floor: f64) -> Result<RateEstimate> {
    if sequences.is_empty() {
        return Err(Error::InsufficientData("no error sequences given".into()));
    }
    let (mut orders, mut linear, mut quadratic, mut used) = (Vec::new(), Vec::new(), Vec::new(), 0);
    for seq in sequences {
        let d: Vec<f64> = seq.iter().copied().filter(|x| x.is_finite() && *x > floor).collect();
        used += d.len();
        orders.extend(d.windows(3).filter_map(|w| {
            let (num, den) = ((w[2] / w[1]).ln(), (w[1] / w[0]).ln());
            (den.abs() > f64::EPSILON).then(|| num / den)
        }));
        linear.extend(d.windows(2).map(|w| w[1] / w[0]));
        quadratic.extend(d.windows(2).map(|w| w[1] / (w[0] * w[0])));
    }
    if used < MIN_USABLE {
        return Ok(RateEstimate::inconclusive(used));
    }
    let (Some(order), Some(linear_ratio), Some(quadratic_ratio)) = (median(orders), median(linear), median(quadratic))
    else {
        return Ok(RateEstimate::inconclusive(used));
    };
    let class = if order >= QUADRATIC_ORDER {
        RateClass::Quadratic
    } else if (LINEAR_ORDER.0..=LINEAR_ORDER.1).contains(&order) {
        if linear_ratio < 1.0 {
            RateClass::Linear
        } else {
            RateClass::Inconclusive
        }
    } else if order > LINEAR_ORDER.1 {
        RateClass::Superlinear
    } else {
        RateClass::Inconclusive
    };
    Ok(RateEstimate { class, order, linear_ratio, quadratic_ratio, used })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
