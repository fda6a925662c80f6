use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed trace {path}: {message} (at byte offset {offset})")]
    TraceBytes {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("malformed trace {path}: {message} (at line {line})")]
    TraceLine {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("memory budget of {memory_bytes} bytes is too small: {message}")]
    MemoryTooSmall {
        memory_bytes: usize,
        message: String,
    },

    #[error("the trace contains no heavy hitters at threshold {threshold}")]
    NoHeavyHitters { threshold: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
