use std::io;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes of two operands do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A block or leg violates the U(1) charge bookkeeping.
    #[error("charge violation: {0}")]
    Charge(String),

    /// A decomposition was asked to factor an all-zero tensor.
    #[error("degenerate tensor: all entries are zero")]
    DegenerateTensor,

    /// A state with zero norm cannot be canonicalized.
    #[error("degenerate state: norm is zero")]
    DegenerateState,

    /// An input violated a documented invariant (e.g. an unnormalized spectrum).
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A computation was refused up front (size limits, empty regions, ...).
    #[error("refused: {0}")]
    Refused(String),

    /// A persisted record lacks a field needed by the caller.
    #[error("record incomplete: {0}")]
    RecordIncomplete(String),

    /// A gradient cache does not belong to the forward pass it is used with.
    #[error("stale cache: {0}")]
    StaleCache(String),

    /// A binary or text file could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    /// Bad configuration value or unknown key.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
