use thiserror::Error;

/// Errors raised by the planning library.
///
/// Constraint violations are never reported through this type; feasibility
/// checking returns them as data (see [`crate::model::Violation`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("oracle refused instance: {0}")]
    OracleRefused(String),

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
