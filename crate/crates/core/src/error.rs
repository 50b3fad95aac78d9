use thiserror::Error;

/// Errors raised across the toolkit.
///
/// `Config` errors are problems with user input (exit code 2 at the CLI);
/// everything else is a numerical or runtime failure (exit code 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate spectrum: levels {index} and {next} differ by {gap:e} (tolerance {tolerance:e}); refine the grid or widen the half-width")]
    Degeneracy {
        index: usize,
        next: usize,
        gap: f64,
        tolerance: f64,
    },

    #[error("precondition violated: {inequality} fails ({lhs} vs {rhs})")]
    Precondition {
        inequality: String,
        lhs: f64,
        rhs: f64,
    },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("covariance not positive definite: spectral weight {index} = {value:e}")]
    Definiteness { index: usize, value: f64 },

    #[error("inconsistent criteria: {0}")]
    Inconsistent(String),

    #[error("malformed loop file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
