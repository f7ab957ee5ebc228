use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PNG: {0}")]
    Png(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("class value {value} out of range (C = {num_classes}) at (x={x}, y={y})")]
    LabelOutOfRange {
        value: u8,
        num_classes: usize,
        x: usize,
        y: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("pixel (x={x}, y={y}) has zero channel sum")]
    ZeroSum { x: usize, y: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no qualifying samples for class {class} ({name})")]
    EmptyClass { class: usize, name: String },
    #[error("unmatched sample: {0}")]
    Orphan(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::ZeroSum { .. } | Error::NonFinite(_) | Error::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
