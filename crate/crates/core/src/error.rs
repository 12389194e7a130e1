use thiserror::Error;

/// Errors raised by the library.
///
/// Data and convergence problems are distinguished from argument misuse so
/// the CLI can map them onto different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: negative edge weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },

    #[error("line {line}: node id {id} outside the declared range of {n} nodes")]
    NodeOutOfRange { line: usize, id: i64, n: usize },

    #[error("line {line}: duplicate edge ({u}, {v})")]
    DuplicateEdge { line: usize, u: usize, v: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("clustering into {m} groups left at least one group empty")]
    EmptyCluster { m: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("matrix entry ({row}, {col}) = {value} is not strictly positive")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },

    #[error("scaling did not converge after {iterations} iterations (residual {residual:e})")]
    ScalingNotConverged { iterations: usize, residual: f64 },

    #[error("symmetric eigendecomposition did not converge")]
    EigenNotConverged,

    #[error("value {value} at ({row}, {col}) is outside the support of the {law} law")]
    OutsideSupport {
        law: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad arguments rather than by the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::Config { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
