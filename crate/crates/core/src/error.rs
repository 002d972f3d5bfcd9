//! Error type shared across the library.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by decoding, validation, estimation, and the tuning
/// harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Reading a file failed.
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file was read but could not be decoded.
    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    /// The raster format is not one of the supported encodings.
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    /// An image violates a type invariant (dimensions, finiteness, range).
    #[error("invalid image: {0}")]
    InvalidImage(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Inputs that are individually valid do not fit together.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A mask (given or computed) excludes every pixel.
    #[error("mask excludes every pixel")]
    EmptyMask,

    /// The pooled estimate vector is all-zero; the caller decides the
    /// fallback rather than silently substituting an achromatic guess.
    #[error("estimator produced an all-zero pooled vector")]
    ZeroSignal,

    /// A manifest row failed to parse or validate.
    #[error("manifest {path} line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    /// A fold assignment does not partition the dataset.
    #[error("fold assignment: {0}")]
    Folds(String),

    /// A run finished but produced nothing usable (all tuples skipped,
    /// too few pairs, zero variance).
    #[error("degenerate result: {0}")]
    Degenerate(String),

    /// An error attributable to a specific dataset record.
    #[error("record {image_id}: {source}")]
    Record {
        image_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the dataset record it belongs to.
    pub fn for_record(image_id: impl Into<String>, source: Error) -> Self {
        Error::Record {
            image_id: image_id.into(),
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
