use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("covariance matrix is numerically singular (condition number {0:.3e})")]
    SingularCovariance(f64),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("eigendecomposition did not converge after {0} sweeps")]
    NotConverged(usize),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("invalid lattice parameters: {0}")]
    InvalidParams(String),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("all shaping weights underflow to zero at x' = {0}")]
    DegenerateShaping(f64),

    #[error("quadrature failed to reach tolerance {tol:e} (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure { tol: f64, estimate: f64, error: f64 },

    #[error("all list paths reached an infinite or undefined metric")]
    MetricUnderflow,

    #[error("reliability data unavailable: {0}")]
    MissingDataFile(String),

    #[error("role allocation overflow at level {level}: {requested} positions requested, block length {n}")]
    AllocationOverflow { level: usize, requested: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trial {trial} failed: {source}")]
    Trial { trial: usize, source: Box<Error> },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
