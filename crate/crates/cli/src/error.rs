//! CLI failures and their exit codes.

use std::path::PathBuf;

use thiserror::Error;

use puzzlegen_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Seed validation or grading input did not check out.
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("bad input: {0}")]
    Input(String),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.class(),
            CliError::Io { .. } => "IoError",
            CliError::Validation(_) => "ValidationFailed",
            CliError::Input(_) => "InputError",
        }
    }

    /// 0 ok, 2 validation, 3 generation exhausted, 4 solver, 5 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 5,
            CliError::Core(CoreError::Io(_)) => 5,
            CliError::Core(CoreError::GenerationExhausted { .. }) => 3,
            CliError::Core(CoreError::SolverUnavailable(_) | CoreError::SolverTimeout) => 4,
            _ => 2,
        }
    }
}
