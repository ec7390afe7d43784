use thiserror::Error;

/// Errors raised by the cusp flow library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CuspError {
    #[error("point (x = {x}, t = {t}) lies outside the space-time domain")]
    Domain { x: f64, t: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix logarithm does not converge: operator norm {norm} >= 1")]
    Convergence { norm: f64 },

    #[error("smallness violated: sup|h| = {value} >= 0.1")]
    Smallness { value: f64 },

    #[error("sample at s = {s} falls outside the stored window [{s_min}, {s_max}]")]
    Window { s: f64, s_min: f64, s_max: f64 },

    #[error("flow left the smallness ball at t = {t} (sup|h| = {sup})")]
    BlowUp { t: f64, sup: f64 },

    #[error("non-finite values encountered at t = {t}")]
    NumericalFailure { t: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CuspError {
    fn from(e: std::io::Error) -> Self {
        CuspError::Io(e.to_string())
    }
}

impl From<csv::Error> for CuspError {
    fn from(e: csv::Error) -> Self {
        CuspError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CuspError>;
