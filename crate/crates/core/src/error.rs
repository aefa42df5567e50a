//! Error types shared across the workbench.

use thiserror::Error;

/// Errors produced by mechanisms, queries, the accountant, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated its documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mechanism or harness configuration is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Rejection sampling exceeded its retry cap.
    #[error("rejection sampling did not produce an in-domain draw after {attempts} attempts")]
    NonConvergence { attempts: u64 },

    /// The privacy budget cannot cover the requested spend. The query result
    /// must not be released.
    #[error("privacy budget exhausted: requested epsilon {requested}, remaining {remaining}")]
    BudgetExhausted { requested: f64, remaining: f64 },

    /// The (query, definition) or (query, mechanism) pair is not supported.
    #[error("not implemented: {0}")]
    NotImplemented(String),

    /// A relative error was requested against a zero baseline.
    #[error("baseline is zero; relative error is undefined")]
    UndefinedBaseline,

    /// CSV ingestion failed; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    CsvParse {
        path: String,
        line: u64,
        message: String,
    },

    /// An I/O failure, annotated with the path that produced it.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
