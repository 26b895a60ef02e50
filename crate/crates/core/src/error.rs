//! Error type shared by every module in the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised while parsing, transforming, or estimating.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file.
    #[error("format error at line {line}: {message}")]
    Format {
        /// 1-based line number in the source text (0 when not tied to a line)
        line: usize,
        /// What went wrong
        message: String,
    },

    /// A required CSV column is absent.
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    /// A value is outside the domain of a transformation (e.g. log of a non-positive level).
    #[error("domain error in series `{series}` at {date}: {message}")]
    Domain {
        /// Series name
        series: String,
        /// Offending date
        date: String,
        /// Description
        message: String,
    },

    /// A parameter violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Not enough observations for the requested estimation.
    #[error("insufficient data for {context}: need at least {required}, got {actual}")]
    InsufficientData {
        /// Which computation
        context: String,
        /// Minimum required
        required: usize,
        /// What was available
        actual: usize,
    },

    /// A series has zero variance over its observed support.
    #[error("series `{0}` has zero variance")]
    ZeroVariance(String),

    /// A design or regressor matrix lacks full column rank.
    #[error("rank-deficient design: column(s) {columns:?} are collinear with earlier columns")]
    RankDeficient {
        /// Names (or indices) of the offending columns
        columns: Vec<String>,
    },

    /// Matrix expected to be positive definite is not.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// An autoregressive polynomial has a root on or inside the unit circle.
    #[error("unstable dynamics: {0}")]
    Unstable(String),

    /// Two inputs that must share a date index do not.
    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    /// An operation received an empty collection.
    #[error("empty input: {0}")]
    Empty(String),

    /// Too many bootstrap replications failed.
    #[error("bootstrap failed: {failed} of {reps} replications could not be estimated")]
    BootstrapFailure {
        /// Failed replications
        failed: usize,
        /// Requested replications
        reps: usize,
    },

    /// Aggregated per-series failures from a panel-wide operation.
    #[error("{} series failed: {}", .0.len(), summarize(.0))]
    PerSeries(Vec<(String, Box<Error>)>),
}

fn summarize(errors: &[(String, Box<Error>)]) -> String {
    errors
        .iter()
        .map(|(name, e)| format!("{name}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    pub(crate) fn insufficient(context: impl Into<String>, required: usize, actual: usize) -> Self {
        Error::InsufficientData {
            context: context.into(),
            required,
            actual,
        }
    }
}
