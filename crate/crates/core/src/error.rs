use thiserror::Error;

/// Errors raised by the boosting library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("label space needs at least two classes, got k = {0}")]
    TooFewClasses(usize),

    #[error("label {label} is outside [1..{k}]")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("importance weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("potential table would need more than {cap} entries")]
    ResourceLimit { cap: usize },

    #[error("non-finite gradient {0}")]
    NonFiniteGradient(f64),

    #[error("expert horizon of {0} rounds exhausted")]
    HorizonExhausted(usize),

    #[error("weak learner {index} failed: {reason}")]
    Learner { index: usize, reason: String },

    #[error("feature index {index} out of range for {len} features")]
    FeatureIndex { index: usize, len: usize },

    #[error("round protocol violated: {0}")]
    Protocol(&'static str),

    #[error("malformed log at entry {entry}: {reason}")]
    MalformedLog { entry: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
