//! CLI error type carrying the exit-code contract.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Input columns do not match the model configuration (exit 2).
    Schema(String),
    /// Malformed cell or record, with the 1-based input line (exit 3).
    Parse { line: u64, message: String },
    /// Anything else (exit 1).
    Other(String),
}

impl CliError {
    pub fn other(msg: impl Into<String>) -> CliError {
        CliError::Other(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(msg) => write!(f, "schema mismatch: {msg}"),
            CliError::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            CliError::Other(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<streamstat_core::Error> for CliError {
    fn from(e: streamstat_core::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
