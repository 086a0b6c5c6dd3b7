use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the coverloop library.
#[derive(Error, Debug)]
pub enum Error {
    /// Invalid configuration: bad constraint files, covergroup definitions,
    /// mismatched bin lists, unknown fields, and similar setup problems.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid data fed to a numeric routine (non-finite values, empty sets).
    #[error("data error: {0}")]
    Data(String),

    /// A hyperparameter or argument outside its accepted range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An input value outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Division with a zero or non-positive denominator in a metric.
    #[error("division error: {0}")]
    Division(String),

    /// A column with zero variance where variation is required.
    #[error("zero-variance column: {0}")]
    ZeroVariance(String),

    /// A coverbin that cannot be modeled from the collected data.
    #[error("bin not learnable: {bin}: {reason}")]
    NotLearnable { bin: String, reason: String },

    /// Malformed file content, with the 1-based line it was found on.
    #[error("parse error: {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Filesystem failure, annotated with the path involved.
    #[error("io error: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage was invoked before its upstream stage produced its
    /// artifacts.
    #[error("missing upstream artifact {path}: run `{stage}` first")]
    MissingStage { path: PathBuf, stage: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
