use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Inconsistent or out-of-range configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// Newton (and its fallback) failed to converge. Carries the last iterate.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {reason}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        reason: String,
        last_speed: f64,
        last_iterate: Vec<f64>,
    },

    /// An envelope constant could not be derived from the supplied data.
    #[error("derivation error: {0}")]
    Derivation(String),

    /// Front extraction failed for a snapshot.
    #[error("extraction error at t = {t}: {reason}")]
    Extraction { t: f64, reason: String },

    /// A shift fit did not find an interior optimum.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
