use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure modes of the
/// numerical pipeline so callers (and the CLI) can report them
/// machine-readably.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),
    #[error("unstable evaluation: {0}")]
    UnstableEvaluation(String),
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("moments unreliable: {0}")]
    MomentsUnreliable(String),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numerics inconsistent: {0}")]
    NumericsInconsistent(String),
    #[error("truncation error: {0}")]
    TruncationError(String),
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::TruncationTooSmall(_) => "truncation-too-small",
            Error::UnstableEvaluation(_) => "unstable-evaluation",
            Error::GridTooSmall(_) => "grid-too-small",
            Error::InvalidGeometry(_) => "invalid-geometry",
            Error::MomentsUnreliable(_) => "moments-unreliable",
            Error::InvalidMixture(_) => "invalid-mixture",
            Error::InvalidState(_) => "invalid-state",
            Error::InvalidInput(_) => "invalid-input",
            Error::InsufficientData(_) => "insufficient-data",
            Error::NumericsInconsistent(_) => "numerics-inconsistent",
            Error::TruncationError(_) => "truncation-error",
            Error::ConditionViolated(_) => "condition-violated",
            Error::Config(_) => "config-error",
            Error::Io(_) => "io-error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
