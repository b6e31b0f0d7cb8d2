use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("regularization scale must be strictly positive, got {0}")]
    InvalidEps(f64),
    #[error("argument outside the open unit spectral ball (operator norm {op_norm})")]
    OutsideDomain { op_norm: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid inertial scaling: gamma*h = {0} must lie in (0, 1)")]
    InvalidScaling(f64),
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: u64 },
    #[error("too few records: need at least {needed}, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no samples above the floor")]
    NoRetainedSamples,
    #[error("field is not positive on the fit window")]
    NonPositiveField,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("gaussian scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("log-scale plot needs positive values")]
    NonPositiveForLog,
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
