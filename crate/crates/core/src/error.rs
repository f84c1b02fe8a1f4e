//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    FileRead {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    FileWrite {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed CSV at line {line}, column `{column}`: {message}")]
    CsvParse {
        line: usize,
        column: String,
        message: String,
    },

    #[error("duplicate observation for machine `{machine_id}` at {hour}")]
    DuplicateObservation { machine_id: String, hour: String },

    #[error("unknown group `{group_id}`{context}")]
    UnknownGroup { group_id: String, context: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("regressor input is degenerate: {0}")]
    DegenerateRegressor(String),

    #[error("group `{group_id}` has {have} observations, need at least {need}")]
    InsufficientSamples {
        group_id: String,
        have: usize,
        need: usize,
    },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error(
        "search space of {points} candidate points exceeds the {max} limit; \
         reduce delta_max or optimize groups in separate runs (coordinate search)"
    )]
    SearchSpaceTooLarge { points: u128, max: u128 },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn unknown_group(group_id: impl Into<String>) -> Self {
        Error::UnknownGroup {
            group_id: group_id.into(),
            context: String::new(),
        }
    }

    pub(crate) fn unknown_group_at_line(group_id: impl Into<String>, line: usize) -> Self {
        Error::UnknownGroup {
            group_id: group_id.into(),
            context: format!(" (line {line})"),
        }
    }
}
