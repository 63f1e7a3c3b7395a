//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors produced by statistics, map building, sampling, metrics and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (range, length, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Too few explanation samples for the requested significance level.
    #[error("insufficient samples: need at least {required} for alpha={alpha}, got {actual}")]
    InsufficientSamples {
        required: usize,
        actual: usize,
        alpha: f64,
    },

    /// Input admits no meaningful answer (e.g. clustering identical values).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The confidence indices leave no ranks to average.
    #[error("empty trim range: k1={k1}, k2={k2} leave no interior ranks")]
    EmptyTrim { k1: usize, k2: usize },

    /// A noise spec or operation was applied to an input kind it does not support.
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    /// The predictor score used for normalization is effectively zero.
    #[error("metric undefined: clean-input score {score:e} is below 1e-9")]
    ZeroScore { score: f64 },

    /// A faithfulness region mask selects no features.
    #[error("empty region mask")]
    EmptyMask,

    /// A binary or textual artifact does not conform to its format.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// A matrix entry is NaN or infinite.
    #[error("non-finite value at sample {sample}, feature {feature}")]
    NonFinite { sample: usize, feature: usize },

    /// Failure while reading or writing a file.
    #[error("i/o error ({context}): {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    /// An error raised while processing one sample of a batch.
    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// An error raised while processing one noise draw of a batch.
    #[error("draw {index}: {source}")]
    AtDraw {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// The innermost error once per-sample / per-draw annotations are stripped.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::AtSample { source, .. } | Error::AtDraw { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
