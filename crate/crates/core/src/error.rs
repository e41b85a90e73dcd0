use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Transport failed on every attempt.
    #[error("provider unavailable on {endpoint} after {attempts} attempt(s): {reason}")]
    ProviderUnavailable {
        endpoint: String,
        attempts: u32,
        reason: String,
    },

    /// The provider answered with a non-2xx status and an error body.
    #[error("provider rejected {endpoint} with status {status} ({code}): {message}")]
    ProviderRejected {
        endpoint: String,
        status: u16,
        code: String,
        message: String,
    },

    /// A response body did not satisfy the wire schema or its contract.
    #[error("protocol error on {endpoint}: {reason}")]
    Protocol { endpoint: String, reason: String },

    /// An operation was called with arguments violating its precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ingest error in {source_name}: {reason}")]
    Ingest { source_name: String, reason: String },

    /// A line-oriented text file failed to parse.
    #[error("{source_name}:{line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("invalid bundle {source_name}: {reason}")]
    Bundle { source_name: String, reason: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn protocol(endpoint: &str, reason: impl Into<String>) -> Self {
        Error::Protocol {
            endpoint: endpoint.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn ingest(source_name: &str, reason: impl Into<String>) -> Self {
        Error::Ingest {
            source_name: source_name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
