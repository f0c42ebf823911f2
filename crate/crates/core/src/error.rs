use thiserror::Error;

/// Errors produced by the detection engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer dimensions do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A model file failed structural parsing (bad magic, version, descriptor).
    #[error("model format error: {0}")]
    Format(String),

    /// A model file ended before its declared payload.
    #[error("truncated model file: {0}")]
    Truncated(String),

    /// A well-formed model violates a cascade geometry invariant.
    #[error("model geometry error: {0}")]
    Geometry(String),

    /// Training failed (divergence, empty class, bad sample).
    #[error("training error: {0}")]
    Training(String),

    /// Strip packing could not place a rectangle.
    #[error("packing error: {0}")]
    Packing(String),

    /// An input image could not be decoded.
    #[error("image decode error: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
