use std::path::PathBuf;

/// Failures of a CLI command. Every variant maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or inconsistent user input.
    #[error("{0}")]
    Input(String),
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Solver(#[from] srw_core::Error),
    #[error("{}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    /// 2 for anything the user can fix by changing the input, 1 when an
    /// output could not be written.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Write { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    /// Results were written but some solve stopped before its gap target.
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Converged => 0,
            Outcome::NotConverged => 3,
        }
    }

    pub fn from_converged(converged: bool) -> Self {
        if converged {
            Outcome::Converged
        } else {
            Outcome::NotConverged
        }
    }
}
