use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a mathematical precondition or a type invariant.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structured document could not be read; `location` names the
    /// offending element or line.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unknown class {name:?}; vocabulary is [{}]", vocabulary.join(", "))]
    UnknownClass { name: String, vocabulary: Vec<String> },

    #[error("codec error for {}: {message}", path.display())]
    Codec { path: PathBuf, message: String },

    #[error("i/o error for {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Parse { .. } => "parse",
            Error::UnknownClass { .. } => "unknown_class",
            Error::Codec { .. } => "codec",
            Error::Io { .. } => "io",
        }
    }
}
