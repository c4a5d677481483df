use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Compute(#[from] polarlattice::Error),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 0 success, 1 I/O, 2 config, 3 numerical instability, 4 validation.
    pub fn exit_code(&self) -> u8 {
        use polarlattice::Error as E;
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Compute(E::InvalidArgument(_) | E::DimensionMismatch { .. }) => 2,
            CliError::Compute(E::Instability(_) | E::Numerical(_)) => 3,
            CliError::Validation(_) => 4,
        }
    }
}
