use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("derivative order {order} unsupported for dimension {dim}")]
    UnsupportedOrder { order: usize, dim: usize },

    #[error("sample index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("direction has zero length")]
    ZeroDirection,

    #[error("{context}: no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error("coefficient {name} decreased from {old} to {new}")]
    MonotonicityViolation { name: String, old: f64, new: f64 },

    #[error("estimating sequence is degenerate: all coefficients vanish but the linear part does not")]
    Degenerate,

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("diverged at iteration {iteration}: objective {value:e}")]
    Diverged { iteration: usize, value: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: feature indices must be strictly ascending ({prev} then {next})")]
    NonAscendingIndex { line: usize, prev: usize, next: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("requested {requested} samples but only {available} are available")]
    SizeExceeded { requested: usize, available: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
