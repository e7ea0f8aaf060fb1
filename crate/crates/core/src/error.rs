use thiserror::Error;

/// Errors raised by the allocation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Geometry or channel parameters that cannot produce a scenario.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A consistency check on generated data failed.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("scenario format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
