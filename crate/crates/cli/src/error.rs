use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {source}")]
    Compute { context: String, source: cohdisc_core::Error },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Compute {
                source: cohdisc_core::Error::InvalidInput(_) | cohdisc_core::Error::Singular(_),
                ..
            } => 2,
            CliError::Compute { .. } | CliError::Invariant(_) => 1,
        }
    }
}

/// Attach command context to a library error.
pub trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for cohdisc_core::Result<T> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Compute { context: what.to_string(), source })
    }
}
