use std::io;
use std::path::PathBuf;

/// Failures of the command line layer, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Bench { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Core(#[from] npenas_core::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// 1 for usage, configuration and input-file problems; 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Bench { .. } => 1,
            CliError::Core(_) | CliError::Io { .. } | CliError::Runtime(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
