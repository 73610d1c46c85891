use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value does not fit the field it is stored in.
    #[error("range error: {0}")]
    Range(String),

    /// Malformed file contents (truncated records, wrong field counts).
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed but invalid data (non-finite coordinates, bad rotations).
    #[error("data error: {0}")]
    Data(String),

    /// Two inputs that must agree in size or shape do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Scan indices out of order, too few scans, ledger mismatch.
    #[error("sequence error: {0}")]
    Sequence(String),

    /// A required file or frame is missing.
    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
