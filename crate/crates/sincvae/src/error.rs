//! Crate-wide error type.
//!
//! One flat enum; variants are grouped by how a caller should react
//! (fix the config, supply the missing file, inspect the data, or
//! report the numeric failure), which is also how the CLI maps them
//! to exit codes.

use std::fmt;
use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Invalid configuration, bad argument, or shape mismatch between
    /// caller-supplied pieces. The message names the offending key or
    /// both shapes.
    Config(String),
    /// A required input artifact does not exist.
    MissingInput(PathBuf),
    /// An input exists but its content is not a valid instance of its
    /// declared format. Carries file/line context where available.
    Malformed(String),
    /// A numeric invariant failed at runtime (non-finite loss or
    /// gradient, degenerate statistic, empty sample, ...).
    Numeric(String),
    /// I/O failure other than "missing input".
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    /// Shape-mismatch constructor; reports both shapes.
    pub fn shape(context: &str, expected: &[usize], got: &[usize]) -> Self {
        Error::Config(format!(
            "{context}: shape mismatch, expected {expected:?}, got {got:?}"
        ))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code used by the CLI: configuration errors are 2,
    /// missing inputs 3, malformed data 4, numeric failures 5.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::MissingInput(_) => 3,
            Error::Malformed(_) | Error::Io { .. } => 4,
            Error::Numeric(_) => 5,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::MissingInput(path) => {
                write!(f, "missing input: {}", path.display())
            }
            Error::Malformed(msg) => write!(f, "malformed data: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::Io { path, source } => {
                write!(f, "io error on {}: {source}", path.display())
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
