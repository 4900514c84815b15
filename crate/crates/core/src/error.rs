use thiserror::Error;

/// Errors produced by the numerical pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("density is not normalized: integral = {integral:.12e}")]
    NotNormalized { integral: f64 },

    #[error("wrong configuration space: {0}")]
    WrongSpace(String),

    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("stability bound violated: {ratio_name} = {value:.4} exceeds {limit:.4}")]
    Stability {
        ratio_name: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("shifted evaluation leaves the grid: support margin {margin:.4e} < required {required:.4e}")]
    GridMargin { margin: f64, required: f64 },

    #[error("renormalization factor {factor:.12} outside 1 +/- {tolerance:e} at step {step}")]
    Normalization {
        factor: f64,
        tolerance: f64,
        step: usize,
    },

    #[error("numerical overflow in {0}")]
    Overflow(&'static str),

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("background window exhausted at t = {t:.6}")]
    WindowExhausted { t: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
