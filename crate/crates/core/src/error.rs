use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidSpec(String),

    #[error("noise law `{0}` has no smooth density")]
    NoSmoothDensity(&'static str),

    #[error("order {order} exceeds the supported cap {cap}")]
    OrderTooHigh { order: usize, cap: usize },

    #[error("no applicable method for ϑ_{k} of `{f}` under `{noise}` noise")]
    NoApplicableMethod { f: String, noise: &'static str, k: usize },

    #[error("information index not detected up to k_max = {k_max}")]
    IndexNotDetected { k_max: usize },

    #[error("function is not integrable against the noise law: {0}")]
    NotIntegrable(String),

    #[error("quadrature did not reach tolerance (estimated error {error:e})")]
    QuadratureFailed { error: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver not converged after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix size {n} exceeds the dense-solver cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config { line: 0, msg: msg.into() }
    }

    /// True for failures caused by numerics rather than user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::QuadratureFailed { .. }
                | Error::NoApplicableMethod { .. }
                | Error::IndexNotDetected { .. }
                | Error::NotIntegrable(_)
        )
    }
}
