use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter {0:?} lies outside the parameter domain")]
    OutOfDomain(Vec<f64>),

    #[error("zero pivot at row {0} during factorization")]
    SingularPivot(usize),

    #[error("linear solve did not reach the residual target (relative residual {0:e})")]
    SolveFailed(f64),

    #[error("reduced system is near-singular (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("offline residual data is corrupt (squared residual norm {0:e})")]
    CorruptResidual(f64),

    #[error("refinement exceeded the maximum tree depth {0}")]
    DepthExceeded(usize),

    #[error("no training points fall into the region of node {0}")]
    EmptyRegion(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("library file: {0}")]
    Format(String),

    #[error("library file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("library file is truncated")]
    Truncated,

    #[error("library file checksum does not match its contents")]
    ChecksumMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
