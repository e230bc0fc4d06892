use thiserror::Error;

/// Errors produced by the reduction and inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("monomial count C({n}+{degree}-1, {degree}) overflows usize")]
    Overflow { n: usize, degree: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite right-hand side at {context}")]
    NonFinite { context: String },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("snapshot pair {index} ({provenance}) failed: {source}")]
    PairFailed {
        index: usize,
        provenance: String,
        #[source]
        source: Box<Error>,
    },

    #[error("requested {requested} modes but snapshot matrix has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("matrix is numerically singular (pivot {pivot:e} at column {column}, threshold {threshold:e})")]
    Singular {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("model does not expose multilinear maps for degree {degree}; use exact operator inference instead")]
    NoMultilinearAccess { degree: usize },

    #[error("basis mismatch: leading columns differ by {deviation:e}")]
    BasisMismatch { deviation: f64 },

    #[error("cannot estimate time step: every quotient had a vanishing denominator")]
    CannotEstimate,

    #[error("reference operator has zero norm")]
    ZeroReference,

    #[error("degenerate simplex: affine rank {rank} < {dim}")]
    DegenerateSimplex { rank: usize, dim: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
