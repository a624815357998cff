use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("failed to decode image: {0}")]
    Decode(String),

    #[error("failed to encode image: {0}")]
    Encode(String),

    #[error("environment map must have a 2:1 aspect ratio, got {width}x{height}")]
    AspectRatio { width: usize, height: usize },

    #[error("resolution mismatch: expected {expected:?}, got {actual:?}")]
    ResolutionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid light set: {0}")]
    InvalidLight(String),

    #[error("malformed light file: {0}")]
    MalformedLights(String),

    #[error("zero-length direction vector")]
    ZeroDirection,

    #[error("mask is empty")]
    EmptyMask,

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("degenerate scene bounds")]
    DegenerateBounds,

    #[error("sigma {sigma} outside [{min}, {max}]")]
    SigmaOutOfBounds { sigma: f64, min: f64, max: f64 },

    #[error("kernel size {0} must be odd")]
    EvenKernel(usize),

    #[error("need at least {needed} frames, got {actual}")]
    TooFewFrames { needed: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// `losses` holds the loss trace of the failing step up to and including the bad value.
    #[error("optimization diverged in {step} at iteration {iteration}")]
    Diverged {
        step: &'static str,
        iteration: usize,
        losses: Vec<f64>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
