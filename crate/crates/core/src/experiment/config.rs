use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geneq::ProductPoint;
use crate::mreglab::MapVariant;
use crate::newton::{ForcingSequence, InexactnessRule, SemiLocalConstants, StopCriteria};

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    KarcherKkt,
    ScalarRateStudy,
    MregProbe,
    SemilocalCheck,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::KarcherKkt => "karcher_kkt",
            ExperimentKind::ScalarRateStudy => "scalar_rate_study",
            ExperimentKind::MregProbe => "mreg_probe",
            ExperimentKind::SemilocalCheck => "semilocal_check",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::KarcherKkt,
            ExperimentKind::ScalarRateStudy,
            ExperimentKind::MregProbe,
            ExperimentKind::SemilocalCheck,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

/// Inexactness rule as written in a config file. Proximity rules receive
/// their reference point at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleSpec {
    Exact,
    FixedDecay { c: f64, rho: f64 },
    RelativeBall { eta: f64, extreme: bool },
    ProximityLinear { iota: f64 },
    ProximityQuadratic { iota: f64 },
}

impl RuleSpec {
    pub fn needs_reference(&self) -> bool {
        matches!(self, RuleSpec::ProximityLinear { .. } | RuleSpec::ProximityQuadratic { .. })
    }

    pub fn build(&self, reference: Option<&ProductPoint>) -> Result<InexactnessRule> {
        let reference =
            || reference.cloned().ok_or_else(|| Error::Config(format!("rule `{self}` needs a reference solution")));
        Ok(match *self {
            RuleSpec::Exact => InexactnessRule::Exact,
            RuleSpec::FixedDecay { c, rho } => InexactnessRule::FixedDecay { c, rho },
            RuleSpec::RelativeBall { eta, extreme } => {
                InexactnessRule::RelativeBall { forcing: ForcingSequence::Constant(eta), extreme }
            }
            RuleSpec::ProximityLinear { iota } => InexactnessRule::ProximityLinear { iota, reference: reference()? },
            RuleSpec::ProximityQuadratic { iota } => {
                InexactnessRule::ProximityQuadratic { iota, reference: reference()? }
            }
        })
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSpec::Exact => write!(f, "exact"),
            RuleSpec::FixedDecay { c, rho } => write!(f, "fixed_decay({c}, {rho})"),
            RuleSpec::RelativeBall { eta, extreme: false } => write!(f, "relative_ball({eta})"),
            RuleSpec::RelativeBall { eta, extreme: true } => write!(f, "relative_ball_extreme({eta})"),
            RuleSpec::ProximityLinear { iota } => write!(f, "proximity_linear({iota})"),
            RuleSpec::ProximityQuadratic { iota } => write!(f, "proximity_quadratic({iota})"),
        }
    }
}

impl FromStr for RuleSpec {
    type Err = Error;

    /// `exact`, `fixed_decay(c, rho)`, `relative_ball(eta)`,
    /// `relative_ball_extreme(eta)`, `proximity_linear(iota)` or
    /// `proximity_quadratic(iota)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unbalanced parentheses in rule `{s}`")))?;
                (name.trim(), parse_list(inner)?)
            }
            None => (s, Vec::new()),
        };
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!("rule `{name}` takes {n} argument(s), got {}", args.len())))
            }
        };
        let spec = match name {
            "exact" => {
                arity(0)?;
                RuleSpec::Exact
            }
            "fixed_decay" => {
                arity(2)?;
                if !(args[1] > 0.0 && args[1] < 1.0) {
                    return Err(Error::Config(format!("decay ratio {} outside (0, 1)", args[1])));
                }
                RuleSpec::FixedDecay { c: args[0], rho: args[1] }
            }
            "relative_ball" | "relative_ball_extreme" => {
                arity(1)?;
                RuleSpec::RelativeBall { eta: args[0], extreme: name == "relative_ball_extreme" }
            }
            "proximity_linear" => {
                arity(1)?;
                RuleSpec::ProximityLinear { iota: args[0] }
            }
            "proximity_quadratic" => {
                arity(1)?;
                RuleSpec::ProximityQuadratic { iota: args[0] }
            }
            other => return Err(Error::Config(format!("unknown rule `{other}`"))),
        };
        if let RuleSpec::RelativeBall { eta: v, .. }
        | RuleSpec::ProximityLinear { iota: v }
        | RuleSpec::ProximityQuadratic { iota: v } = spec
        {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("rule parameter {v} must be nonnegative")));
            }
        }
        Ok(spec)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_f64).collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>().map_err(|_| Error::Config(format!("`{t}` is not a number")))
}

fn parse_usize(s: &str) -> Result<usize> {
    let t = s.trim();
    t.parse::<usize>().map_err(|_| Error::Config(format!("`{t}` is not a nonnegative integer")))
}

/// One experiment, read from flat `key = value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Label of the run; `A1`..`A4` also preset `n_points` and `radius`.
    pub case: String,
    pub n_points: usize,
    pub radius: f64,
    pub center: Vec<f64>,
    pub seed: u64,
    pub rule: RuleSpec,
    pub stop: StopCriteria,
    /// Starting point of the scalar problems.
    pub start: f64,
    /// Proximity factor used by the rate study.
    pub iota: f64,
    pub variant: Option<MapVariant>,
    pub matrix_size: usize,
    pub ball_radius: f64,
    pub samples: usize,
    pub sigma: Option<f64>,
    pub constants: SemiLocalConstants,
    /// Base name for the per-case history CSV.
    pub history_file: Option<String>,
    /// Base name (without extension) of the summary outputs.
    pub summary_file: String,
}

/// Sample count and constraint radius of the four reference cases.
pub fn case_preset(case: &str) -> Option<(usize, f64)> {
    match case {
        "A1" => Some((10, 2.0)),
        "A2" => Some((500, 2.0)),
        "A3" => Some((10, 0.1)),
        "A4" => Some((500, 0.1)),
        _ => None,
    }
}

pub fn default_semilocal_constants() -> SemiLocalConstants {
    SemiLocalConstants {
        sigma: 0.5,
        mu: 0.5,
        alpha: 1.0,
        beta: 0.5,
        theta: 1.0,
        epsilon: 0.3,
        iota: 0.01,
        delta: 0.15,
        a: None,
        b: None,
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        let start = if kind == ExperimentKind::SemilocalCheck { 1.42 } else { 1.0 };
        ExperimentConfig {
            kind,
            case: match kind {
                ExperimentKind::KarcherKkt => "A1".into(),
                other => other.as_str().into(),
            },
            n_points: 10,
            radius: 2.0,
            center: vec![0.0, 0.0, 0.0, 1.0],
            seed: DEFAULT_SEED,
            rule: RuleSpec::FixedDecay { c: 1.0, rho: 0.1 },
            stop: StopCriteria::default(),
            start,
            iota: 0.1,
            variant: None,
            matrix_size: 2,
            ball_radius: 1.0,
            samples: 1000,
            sigma: None,
            constants: default_semilocal_constants(),
            history_file: None,
            summary_file: "summary".into(),
        }
    }

    /// One of the four reference Karcher cases.
    pub fn karcher_case(case: &str) -> Result<Self> {
        let (n, r) = case_preset(case).ok_or_else(|| Error::Config(format!("unknown case `{case}`")))?;
        let mut c = ExperimentConfig::new(ExperimentKind::KarcherKkt);
        c.case = case.into();
        c.n_points = n;
        c.radius = r;
        Ok(c)
    }

    /// Parses `key = value` lines; `#` starts a comment. `kind` is required
    /// and a `case` preset is applied before the remaining keys, so explicit
    /// values win regardless of line order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = k.trim();
            if pairs.iter().any(|(seen, _): &(&str, &str)| *seen == key) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            pairs.push((key, v.trim()));
        }
        let lookup = |key: &str| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let kind: ExperimentKind = lookup("kind").ok_or_else(|| Error::Config("missing `kind`".into()))?.parse()?;
        let mut c = ExperimentConfig::new(kind);
        if let Some(case) = lookup("case") {
            c.case = case.to_string();
            if let Some((n, r)) = case_preset(case) {
                c.n_points = n;
                c.radius = r;
            }
        }
        for &(key, value) in &pairs {
            c.set(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = &mut self.constants;
        match key {
            "kind" | "case" => {}
            "n_points" => self.n_points = parse_usize(value)?,
            "radius" => self.radius = parse_f64(value)?,
            "center" => self.center = parse_list(value)?,
            "seed" => self.seed = value.parse().map_err(|_| Error::Config(format!("`{value}` is not a valid seed")))?,
            "rule" => self.rule = value.parse()?,
            "tol_phi" => self.stop.tol_phi = parse_f64(value)?,
            "tol_g" => self.stop.tol_g = parse_f64(value)?,
            "max_iters" => self.stop.max_iters = parse_usize(value)?,
            "start" => self.start = parse_f64(value)?,
            "iota" => self.iota = parse_f64(value)?,
            "variant" => self.variant = Some(value.parse()?),
            "matrix_size" => self.matrix_size = parse_usize(value)?,
            "ball_radius" => self.ball_radius = parse_f64(value)?,
            "samples" => self.samples = parse_usize(value)?,
            "sigma" => self.sigma = Some(parse_f64(value)?),
            "c_sigma" => k.sigma = parse_f64(value)?,
            "c_mu" => k.mu = parse_f64(value)?,
            "c_alpha" => k.alpha = parse_f64(value)?,
            "c_beta" => k.beta = parse_f64(value)?,
            "c_theta" => k.theta = parse_f64(value)?,
            "c_epsilon" => k.epsilon = parse_f64(value)?,
            "c_iota" => k.iota = parse_f64(value)?,
            "c_delta" => k.delta = parse_f64(value)?,
            "c_a" => k.a = Some(parse_f64(value)?),
            "c_b" => k.b = Some(parse_f64(value)?),
            "history_file" => self.history_file = Some(value.to_string()),
            "summary_file" => self.summary_file = value.to_string(),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_points == 0 {
            return fail("n_points must be at least 1".into());
        }
        if !(self.radius > 0.0) {
            return fail(format!("radius {} must be positive", self.radius));
        }
        if self.center.len() != 4 {
            return fail(format!("center needs 4 coordinates, got {}", self.center.len()));
        }
        if !(self.stop.tol_phi > 0.0 && self.stop.tol_g > 0.0) {
            return fail("tolerances must be positive".into());
        }
        if !(self.iota >= 0.0 && self.iota.is_finite()) {
            return fail(format!("iota {} must be a finite nonnegative number", self.iota));
        }
        if !self.start.is_finite() {
            return fail(format!("start {} must be finite", self.start));
        }
        if self.case.is_empty() || self.case.contains(['/', '\\']) {
            return fail(format!("case label `{}` is not a plain name", self.case));
        }
        if self.kind == ExperimentKind::MregProbe && (self.matrix_size == 0 || self.samples == 0) {
            return fail("matrix_size and samples must be positive".into());
        }
        Ok(())
    }

    /// File name of the per-case iteration history.
    pub fn history_name(&self) -> String {
        self.history_file.clone().unwrap_or_else(|| format!("history_{}.csv", self.case))
    }
}
