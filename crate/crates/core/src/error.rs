//! Error type shared by every module of the crate.

use std::fmt;
use std::io;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Invalid argument or violated precondition.
    Argument(String),
    /// A mapped instant left the representable nanosecond range.
    Range(String),
    /// Signal carries no usable information (constant, zero variance).
    DegenerateSignal(String),
    /// Correlation peak below the confidence threshold; the two recordings
    /// probably do not share a common event.
    LowConfidence { peak_correlation: f64 },
    /// Peak sits on the edge of the search window, no interior neighbours
    /// to refine against.
    BoundaryPeak { index: usize, len: usize },
    /// Fewer peaks than the operation needs.
    InsufficientPeaks { found: usize, needed: usize },
    /// Not enough trials or samples for the requested statistic.
    InsufficientData(String),
    /// Trigger-to-frame association failed.
    Association(String),
    /// Operation invoked in the wrong state.
    State(String),
    /// Inconsistent configuration.
    Config(String),
    /// Malformed bundle, manifest or stream file.
    Format(String),
    /// A pipeline stage failed; wraps the underlying error.
    Stage { stage: &'static str, source: Box<Error> },
    Io(io::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// True for errors caused by bad arguments or configuration, as opposed
    /// to bad data.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Argument(_) | Error::Range(_) | Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Range(msg) => write!(f, "time out of range: {msg}"),
            Error::DegenerateSignal(msg) => write!(f, "degenerate signal: {msg}"),
            Error::LowConfidence { peak_correlation } => write!(
                f,
                "low-confidence estimate: peak correlation {peak_correlation:.3} below threshold"
            ),
            Error::BoundaryPeak { index, len } => {
                write!(f, "peak at index {index} of {len} has no interior neighbours")
            }
            Error::InsufficientPeaks { found, needed } => {
                write!(f, "found {found} peaks, need at least {needed}")
            }
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::Association(msg) => write!(f, "trigger association failed: {msg}"),
            Error::State(msg) => write!(f, "invalid state: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Format(msg) => write!(f, "malformed data: {msg}"),
            Error::Stage { stage, source } => write!(f, "stage '{stage}': {source}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            Error::Stage { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}
