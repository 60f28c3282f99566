use thiserror::Error;

/// Failure of a command, mapped to the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] gamelattice::Error),

    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration and validation errors, 3 for numerical and
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}
