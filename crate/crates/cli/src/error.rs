use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid input, or invalid arguments.
    #[error("{0}")]
    Input(String),

    /// The data were read but the estimate could not be produced.
    #[error("{0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) | CliError::Io(_) => ExitCode::from(1),
            CliError::Estimation(_) => ExitCode::from(2),
        }
    }

    pub fn input(e: luria::Error) -> Self {
        CliError::Input(e.to_string())
    }

    pub fn estimation(e: luria::Error) -> Self {
        CliError::Estimation(e.to_string())
    }
}
