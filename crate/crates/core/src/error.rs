//! Error types shared across the toolkit.

use thiserror::Error;

/// Errors produced by geometry, extraction, rendering and evaluation routines.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Query time lies outside the trajectory span.
    #[error("time {query} outside trajectory span [{first}, {last}]")]
    OutOfRange {
        query: f64,
        first: f64,
        last: f64,
    },

    /// The bracketing poses are degenerate (fewer than two poses, or t2 == t1).
    #[error("degenerate interpolation bracket: {0}")]
    DegenerateBracket(String),

    /// Time filtering was requested but timestamps are missing.
    #[error("missing timestamps: {0}")]
    MissingTimestamps(String),

    /// Parallel arrays disagree in length.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// GHPR kernel exponent must be strictly negative.
    #[error("invalid gamma {0}: the inversion kernel requires gamma < 0")]
    InvalidGamma(f64),

    /// Depth value outside the encodable range.
    #[error("depth {0} outside the encodable range (0, 256) m")]
    RangeError(f64),

    /// Descriptor dimensions disagree.
    #[error("descriptor dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The retrieval database is empty.
    #[error("empty retrieval database")]
    EmptyDatabase,

    /// A loss batch with no anchors.
    #[error("empty loss batch")]
    EmptyBatch,

    /// A required sequence label is absent from the input set.
    #[error("missing sequence {0}")]
    MissingSequence(String),

    /// Prediction and ground truth frames have different dimensions.
    #[error("frame shape mismatch: {0}")]
    ShapeMismatch(String),

    /// No pixel is valid in both prediction and ground truth.
    #[error("no jointly valid pixels")]
    NoValidPixels,

    /// Invalid argument or malformed input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A file could not be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    /// Underlying IO failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Image encode/decode failure.
    #[error("image error: {0}")]
    Image(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
