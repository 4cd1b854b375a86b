//! CLI-level errors: everything from the core library plus file ingestion
//! and configuration problems, all renderable as machine-readable objects.

use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] drrd_core::Error),

    #[error("column `{column}` not found in {path}")]
    MissingColumn { column: String, path: String },

    #[error("cannot parse `{value}` in column `{column}` as a real number")]
    UnparseableValue {
        value: String,
        column: String,
        path: String,
        line: u64,
    },

    #[error("{path} has a header but no data rows")]
    EmptyFile { path: String },

    #[error("{path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::MissingColumn { .. } => "MissingColumn",
            CliError::UnparseableValue { .. } => "UnparseableValue",
            CliError::EmptyFile { .. } => "EmptyFile",
            CliError::IoFailure { .. } => "IoFailure",
            CliError::Config(_) => "InvalidConfig",
        }
    }

    pub fn location(&self) -> Option<String> {
        match self {
            CliError::Core(drrd_core::Error::NonFiniteValue { field, row }) => {
                Some(format!("{field}[{row}]"))
            }
            CliError::Core(_) | CliError::Config(_) => None,
            CliError::MissingColumn { path, .. }
            | CliError::EmptyFile { path }
            | CliError::IoFailure { path, .. } => Some(path.clone()),
            CliError::UnparseableValue { path, line, .. } => Some(format!("{path}:{line}")),
        }
    }

    /// The JSON object emitted on stderr when `--pretty` is off.
    pub fn to_object(&self) -> ErrorObject {
        ErrorObject {
            code: self.code(),
            message: self.to_string(),
            location: self.location(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorObject {
    pub code: &'static str,
    pub message: String,
    pub location: Option<String>,
}
