use crate::lp::LpError;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is missing or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A data file could not be ingested. `line` is 1-based and includes the header.
    #[error("ingestion error at line {line}: {message}")]
    Ingestion { line: u64, message: String },

    /// Revenue-neutral calibration could not reach the reference revenue.
    #[error("calibration failed for tariff '{tariff}': revenue gap {gap} NOK")]
    Calibration { tariff: String, gap: f64 },

    /// A consumer-level optimization failed.
    #[error("solver failure for consumer '{consumer}': {source}")]
    Solver {
        consumer: String,
        #[source]
        source: LpError,
    },

    /// An internal consistency check failed; indicates a bug, not bad input.
    #[error("internal check failed: {0}")]
    Internal(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
