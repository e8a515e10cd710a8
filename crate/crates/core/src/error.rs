use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("covariance is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("component {index} has zero weight; remove empty cells before updating lengths")]
    ZeroWeight { index: usize },

    #[error("cell {index} is empty")]
    EmptyCell { index: usize },

    #[error("every cell is empty")]
    AllCellsEmpty,

    #[error("not enough samples: need at least {needed}, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("non-finite log-density ratio at sample {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("theorem hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("metric undefined at {0}")]
    UndefinedMetric(String),

    #[error("unknown fixture `{name}` (valid: {valid})")]
    UnknownFixture { name: String, valid: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
