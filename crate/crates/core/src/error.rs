use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported response dimension {0}")]
    UnsupportedDimension(usize),

    #[error("cdf is flat or not invertible at p = {p}")]
    NonInvertible { p: f64 },

    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    #[error("invalid count for {what}: {got}")]
    InvalidCount { what: &'static str, got: usize },

    #[error("invalid probability: {0}")]
    InvalidProb(String),

    #[error("no schedule recipe for model {model} with family {family}")]
    UnsupportedCombination { model: String, family: String },

    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    #[error("cell {cell} has probability {prob:e} at x = {x:?}")]
    ZeroCellProbability { cell: usize, prob: f64, x: Vec<f64> },

    #[error("degree cap {cap} reached with sup error {achieved:e} above target {target:e}")]
    DegreeCapExceeded { cap: usize, achieved: f64, target: f64 },

    #[error("density supremum unknown: {0}")]
    SupUnknown(String),

    #[error("non-finite log ratio at y = {y}, x = {x:?}")]
    NonFiniteLogRatio { y: f64, x: Vec<f64> },

    #[error("bound variant not applicable: {0}")]
    UnsupportedVariant(String),

    #[error("schedule depends on x; the bound requires x-free h, sigma, delta and r")]
    XDependentSchedule,

    #[error("moment order q = {0} must exceed 2")]
    InvalidMoment(f64),

    #[error("rate fit needs at least 3 usable points, got {got}")]
    InsufficientPoints { got: usize },

    #[error("lemma hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidCount { .. } => 2,
            Error::QuadratureFailure(_)
            | Error::DegreeCapExceeded { .. }
            | Error::NonFiniteLogRatio { .. }
            | Error::NonInvertible { .. } => 4,
            Error::InvariantViolation(_) => 5,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
            _ => 3,
        }
    }
}
