use std::fmt;

use qheat_core::Error as CoreError;

/// Failure of a CLI command, mapped onto a process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration, or an unwritable
    /// output path.
    Config(String),
    /// Exact enumeration above the term cap.
    Enumeration(String),
    /// One or more verification checks failed.
    Verification(String),
    /// Numerical failure inside an otherwise valid run.
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Enumeration(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Core error raised while building the protocol from the field at `path`.
    pub fn at(path: &str, err: CoreError) -> Self {
        match err {
            CoreError::EnumerationTooLarge { .. } => CliError::Enumeration(err.to_string()),
            err => CliError::Config(format!("{path}: {err}")),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::EnumerationTooLarge { .. } => CliError::Enumeration(err.to_string()),
            err => CliError::Runtime(err.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Enumeration(m) => write!(f, "enumeration error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
