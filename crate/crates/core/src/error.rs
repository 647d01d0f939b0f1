use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator / optimizer stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("non-finite coefficient after frequency scaling (index {index}, freq_scale {freq_scale:e})")]
    NonFiniteScaling { index: usize, freq_scale: f64 },

    #[error("simulation diverged at integration step {step}")]
    Diverged { step: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("trace never reaches 90% of its swing")]
    NotRisen,

    #[error("trace never settles within the tolerance band")]
    NotSettled,

    #[error("amplitude {value} V exceeds the {limit} V drive range")]
    AmplitudeCap { value: f64, limit: f64 },

    #[error("bound violation at sample {index}: lo {lo} > hi {hi}")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },

    #[error("sample {index} = {value} V lies outside [{lo}, {hi}]")]
    OutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }
}
