use std::io;

use thiserror::Error;

/// Failures that end a run, each with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text requested; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("unknown column `{name}`; available columns: {}", available.join(", "))]
    UnknownColumn { name: String, available: Vec<String> },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("input line {line}: {source}")]
    Data {
        line: u64,
        #[source]
        source: execflow::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::Usage(_) | CliError::UnknownColumn { .. } => 1,
            CliError::Io { .. } => 2,
            CliError::Data { .. } | CliError::Format(_) => 3,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}
