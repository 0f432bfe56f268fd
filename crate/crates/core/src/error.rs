use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed record in a line-oriented or tabular input file.
    #[error("{}:{line}: field `{field}`: {message}", file.display())]
    Record {
        file: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    /// A domain invariant was violated; `id` names the offending record.
    #[error("invariant violated for `{id}`: {message}")]
    Invariant { id: String, message: String },

    #[error("no speaker markers found in hearing `{hearing_id}`")]
    SegmentationFailed { hearing_id: String },

    #[error("cannot derive standing: {0}")]
    Standing(String),

    #[error("transcript `{hearing_id}` not found at {url}")]
    NotFound { hearing_id: String, url: String },

    #[error("request for `{hearing_id}` failed after {attempts} attempt(s): {message}")]
    Http {
        hearing_id: String,
        attempts: u32,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training data contains a single class ({0})")]
    SingleClass(String),

    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(
        file: impl Into<PathBuf>,
        line: usize,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Record {
            file: file.into(),
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}
