use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto failure classes that callers treat differently:
/// a `Contract` error is a caller bug (bad shape, bad label, bad config),
/// `Numeric` means a computation produced or received a non-finite value,
/// `Format` means a file did not match its declared layout.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("format error in {path} at byte offset {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("parse error in {path} (line {line}): {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
