use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("quadrature rule needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("invalid quadrature rule: {0}")]
    InvalidRule(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("point {point} is outside the kernel domain ({reason})")]
    Domain { point: f64, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("design rows {first} and {second} are identical; interpolation (lambda = 0) needs distinct points")]
    DuplicateDesignRow { first: usize, second: usize },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("system is numerically singular: smallest pivot {pivot:e} at row {row} after jitter {jitter:e}")]
    SingularSystem { pivot: f64, row: usize, jitter: f64 },

    #[error("operation requires a zero-mean (star) ANOVA kernel")]
    NotStarMode,

    #[error("operation requires an ANOVA kernel (star or standard), not a plain tensor product")]
    NotAnovaMode,

    #[error("invalid subset {mask:#b} for dimension {dim}")]
    BadSubset { mask: u64, dim: usize },

    #[error("the empty subset has no sensitivity index")]
    EmptySubset,

    #[error("model is constant (total variance {0:e}); sensitivity indices are undefined")]
    ConstantModel(f64),

    #[error("total model variance is negative ({0:e}); the fit is too ill-conditioned")]
    NegativeVariance(f64),

    #[error("negative sensitivity index {value:e} for subset {mask:#b}")]
    NegativeIndex { mask: u64, value: f64 },

    #[error("dimension {0} exceeds the full-expansion budget of {1}")]
    TooManyDimensions(usize, usize),

    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),

    #[error("invalid regularization parameter {0}")]
    InvalidLambda(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
