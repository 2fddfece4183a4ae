//! Crate-wide error type.
//!
//! Variants group into the three CLI exit classes: validation (1),
//! data (2), and training (3).

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("unknown backbone \"{name}\" (valid: {})", valid.join(", "))]
    Lookup { name: String, valid: Vec<String> },

    #[error("initialization error: {0}")]
    Init(String),

    #[error("decode error at {path}: {msg}")]
    Decode { path: PathBuf, msg: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short kind tag used in machine-readable error summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::Data(_) => "data",
            Error::Lookup { .. } => "lookup",
            Error::Init(_) => "init",
            Error::Decode { .. } => "decode",
            Error::Training(_) => "training",
            Error::Protocol(_) => "protocol",
            Error::Io { .. } => "io",
        }
    }

    /// CLI exit code: 1 validation, 2 data, 3 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Domain(_)
            | Error::Lookup { .. }
            | Error::Init(_)
            | Error::Protocol(_) => 1,
            Error::Data(_) | Error::Decode { .. } | Error::Io { .. } => 2,
            Error::Training(_) => 3,
        }
    }
}
