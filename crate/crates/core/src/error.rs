use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation library.
///
/// The variants map onto the CLI exit-code contract: usage and domain
/// errors exit 2, I/O errors exit 3, data errors exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied an argument combination that cannot be honored.
    #[error("usage error: {0}")]
    Usage(String),

    /// A numeric argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is structurally valid but unusable (no valid pixels,
    /// undecodable image, empty dataset).
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Domain(_) => 2,
            Error::Io { .. } => 3,
            Error::Data(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
