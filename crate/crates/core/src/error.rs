use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    IndexError { index: usize, dim: usize },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("system is unstable (spectral radius {spectral_radius:.6} >= 1)")]
    UnstableSystem { spectral_radius: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    #[error("conditioning block is singular (smallest eigenvalue {min_eigenvalue:e} below floor {floor:e})")]
    SingularConditioning { min_eigenvalue: f64, floor: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("data matrix is rank deficient; use a positive regularization weight")]
    RankDeficient,

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("matrix is not diagonalizable to working precision: {0}")]
    DefectiveMatrix(String),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("name error: {0}")]
    NameError(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or usage).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InvalidCovariance(_)
                | Error::UnstableSystem { .. }
                | Error::NoConvergence { .. }
                | Error::SingularConditioning { .. }
                | Error::RankDeficient
                | Error::Diverged { .. }
                | Error::DefectiveMatrix(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
