use thiserror::Error;

/// Errors raised by the linear algebra, distribution and test routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix must have at least one row and one column")]
    Empty,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular value decomposition failed to converge")]
    ConvergenceFailure,

    #[error("requested rank {rank} exceeds dimension {dim}")]
    RankExceedsDimension { rank: usize, dim: usize },

    #[error("vector has zero norm")]
    ZeroVector,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("second-moment matrix of {0} is singular; cannot normalize")]
    SingularSecondMoment(&'static str),

    #[error("at least two clusters are required, found {0}")]
    TooFewClusters(usize),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("block {0} of the singular vector matrix is numerically singular")]
    BlockSingular(&'static str),

    #[error("min(p, k) must be at least 2 (got p={p}, k={k}); with p=1 or k=1 the null is always true")]
    DimensionError { p: usize, k: usize },

    #[error("failed to write output: {0}")]
    Output(String),

    #[error("sigma must lie in [0, sqrt(n)) = [0, {bound:.4}), got {sigma}")]
    SigmaOutOfRange { sigma: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
