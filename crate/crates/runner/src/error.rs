use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    /// Bad configuration text or a plan that cannot be run.
    #[error("config error: {0}")]
    Config(String),

    /// Numerical failure inside a run.
    #[error("numerical integrity error: {0}")]
    Numerical(spinhydro_core::Error),

    /// A core precondition failed for a plan that passed validation.
    #[error("{0}")]
    Core(spinhydro_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io { path: path.into(), source }
    }

    /// Process exit status: 1 for configuration problems, 2 for numerical
    /// failures. I/O failures also exit with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical(_) => 2,
            RunError::Config(_) | RunError::Core(_) | RunError::Io { .. } => 1,
        }
    }
}

impl From<spinhydro_core::Error> for RunError {
    fn from(e: spinhydro_core::Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e)
        } else {
            RunError::Core(e)
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;
