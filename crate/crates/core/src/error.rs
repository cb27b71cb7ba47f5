use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `label`: unknown label {value:?} (expected killed or survived)")]
    UnknownLabel { row: usize, value: String },

    #[error("row {row}, column `{column}`: {message}")]
    Validation {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("labels contain a single class; {0} is undefined")]
    SingleClass(&'static str),

    #[error("{0} is undefined for this input")]
    Undefined(&'static str),

    #[error("unsupported model format version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse category used by the CLI to pick an exit code.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Csv(e) if e.is_io_error() => ErrorCategory::Io,
            Error::Csv(_)
            | Error::Json(_)
            | Error::MissingColumn(_)
            | Error::Parse { .. }
            | Error::UnknownLabel { .. }
            | Error::Validation { .. }
            | Error::Schema(_)
            | Error::ModelVersion { .. } => ErrorCategory::Data,
            Error::InvalidInput(_) | Error::SingleClass(_) | Error::Undefined(_) => {
                ErrorCategory::Compute
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Data,
    Compute,
}
