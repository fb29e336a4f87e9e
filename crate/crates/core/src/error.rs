use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Operands disagree on site count or vector dimension.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Caller broke a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A Hermiticity or unitarity guard tripped.
    #[error("numerical integrity violated: {0}")]
    Integrity(String),

    #[error("propagation failed: {0}")]
    Propagation(String),

    /// Every singular value of the snapshot matrix fell below the cutoff.
    #[error("degenerate snapshot data: {0}")]
    Degenerate(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("window error: {0}")]
    Window(String),
}

impl Error {
    /// Errors that indicate corrupted numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integrity(_) | Error::Propagation(_) | Error::Degenerate(_) | Error::Eigen(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
