//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its physical or numerical domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration field failed validation. Carries the field path.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Interferometer configuration blocks every path.
    #[error("no throughput: both arms of the {0} interferometer are blocked")]
    NoThroughput(&'static str),

    /// A fit could not be performed or did not converge.
    #[error("fit failed: {0}")]
    Fit(String),

    /// A statistical estimate could not be formed from the data.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A simulated run produced no usable coincidences.
    #[error("empty coincidences: {0}")]
    EmptyCoincidences(String),

    /// Malformed or unreadable time-tag file.
    #[error("tag file error: {0}")]
    TagFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn invalid_config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
