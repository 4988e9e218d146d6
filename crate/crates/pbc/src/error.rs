use thiserror::Error;

/// Errors produced by dataset construction, fitting, clustering, and streaming.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A gradient update was requested for a loss it is not derived for.
    #[error("unsupported loss for gradient update: {0}")]
    UnsupportedLoss(String),

    /// A numeric quantity that must stay finite became NaN or infinite.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Normalization cannot be defined on a constant training series.
    #[error("degenerate range: {0}")]
    DegenerateRange(String),

    /// CSV input failed to parse; the message names the offending row.
    #[error("parse error: {0}")]
    Parse(String),

    /// Reading or writing a file failed.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
