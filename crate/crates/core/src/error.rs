use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time window [{start}, {end}): {reason}")]
    InvalidWindow { start: f64, end: f64, reason: &'static str },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("window mismatch: data window [{data_start}, {data_end}) vs partition window [{part_start}, {part_end})")]
    WindowMismatch {
        data_start: f64,
        data_end: f64,
        part_start: f64,
        part_end: f64,
    },

    #[error("time {time} lies outside the window [{start}, {end})")]
    OutOfWindow { time: f64, start: f64, end: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model schema: field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { field: field.into(), message: message.into() }
    }
}
