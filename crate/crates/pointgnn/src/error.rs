use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (binary records, text formats).
    #[error("format error: {0}")]
    Format(String),
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Training diverged or produced non-finite values.
    #[error("training error: {0}")]
    Training(String),
    /// Synthetic scene generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }

    pub fn generation(msg: impl Into<String>) -> Self {
        Error::Generation(msg.into())
    }
}
