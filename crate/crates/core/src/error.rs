use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("eigenvalue iteration did not converge after {iterations} iterations ({found} of {n} eigenvalues found)")]
    Convergence {
        iterations: usize,
        found: usize,
        n: usize,
        partial: Vec<Complex64>,
    },

    #[error("unstable operator: spectral radius {radius} >= 1")]
    Instability { radius: f64 },

    #[error("matrix is singular or ill-conditioned (reciprocal condition estimate {rcond:e})")]
    Singular { rcond: f64 },

    #[error("invalid network spec: {0}")]
    Spec(String),

    #[error("explosion at step {step}: max |z| = {max_abs:e} exceeds divergence guard")]
    Explosion { step: usize, max_abs: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate information matrix: {0}")]
    DegenerateInformation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
