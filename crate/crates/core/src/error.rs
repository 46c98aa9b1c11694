//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by model, engine, data and trainer operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions, out-of-range hyperparameters, malformed config files.
    #[error("configuration error: {0}")]
    Config(String),
    /// A call received an argument outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Dataset or checkpoint contents that cannot be used.
    #[error("data error: {0}")]
    Data(String),
    /// An internal invariant did not hold.
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 configuration, 3 data, 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Invariant(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
