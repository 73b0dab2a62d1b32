use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sample set needs at least 2 rows, got {0}")]
    TooFewSamples(usize),

    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimensionality must be at least 1")]
    ZeroDimensions,

    #[error("angle {0} is outside [0, 2pi)")]
    AngleOutOfRange(f64),

    #[error("rotation is not supported in {0} dimensions")]
    UnsupportedDimension(usize),

    #[error("a planar rotation must have zero x/y MRP components, got {0:?}")]
    NonPlanarRotation([f64; 3]),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("subset of size {0} cannot be split, need at least 2")]
    SplitTooSmall(usize),

    #[error("insufficient samples: N = {n} < 2^(s*d) = {bins} (s = {depth}, d = {dims})")]
    InsufficientSamples { n: usize, bins: usize, depth: usize, dims: usize },

    #[error("depth {depth} over {dims} dimensions overflows the bin count")]
    DepthTooLarge { depth: usize, dims: usize },

    #[error("invalid cycle order {order:?} for {dims} dimensions")]
    InvalidCycleOrder { order: Vec<usize>, dims: usize },

    #[error("partition has {0} zero-volume bin(s)")]
    DegeneratePartition(usize),

    #[error("support has zero width in dimension {0}")]
    DegenerateSupport(usize),

    #[error("counts ({counts}) and volumes ({volumes}) differ in length")]
    LengthMismatch { counts: usize, volumes: usize },

    #[error("counts sum to {sum}, expected N = {n}")]
    CountMismatch { sum: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("no covariance with det >= {floor} after {attempts} draws")]
    CovarianceExhausted { floor: f64, attempts: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
