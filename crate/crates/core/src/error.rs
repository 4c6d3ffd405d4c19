use thiserror::Error;

use crate::manifold::Chart;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("chart mismatch: expected {expected}, found {found}")]
    ChartMismatch { expected: Chart, found: Chart },

    #[error("tangent vector is not based at the given point")]
    BaseMismatch,

    #[error("invalid point on {chart}: {reason}")]
    InvalidPoint { chart: Chart, reason: String },

    #[error("step of norm {norm} exceeds the injectivity guard {limit}")]
    StepTooLong { norm: f64, limit: f64 },

    #[error("points are antipodal; the logarithm is undefined")]
    Antipodal,

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("frame {frame} is not available on {chart}")]
    UnsupportedFrame { frame: String, chart: Chart },

    #[error("infeasible multiplier {value} in slot {slot}; F(p) is empty")]
    InfeasibleMultiplier { slot: usize, value: f64 },

    #[error("unsupported set-valued structure: {0}")]
    Unsupported(String),

    #[error("rank-deficient differential; the Newton step is singular")]
    SingularStep,

    #[error("every complementarity branch is infeasible")]
    SubproblemInfeasible,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
