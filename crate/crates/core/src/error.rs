//! Error type shared across the crate.

use std::path::PathBuf;

/// Everything that can go wrong while building an index or denoising.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two buffers that must agree in shape do not.
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// A parameter is outside its valid range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A numeric argument left the domain of the function (negative mean,
    /// non-finite value, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation that needs data received none, or only zeros.
    #[error("empty or all-zero input: {0}")]
    EmptyInput(String),

    /// The image is smaller than the patch it should be cut into.
    #[error("image smaller than patch: {width}x{height} image, side {side}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        side: usize,
    },

    /// A patch position reaches outside the target image.
    #[error("patch at ({row}, {col}) with side {side} exceeds {width}x{height} image")]
    PatchOutOfBounds {
        row: usize,
        col: usize,
        side: usize,
        width: usize,
        height: usize,
    },

    /// Patch aggregation left a pixel with no contributing patch.
    #[error("pixel ({row}, {col}) is covered by no patch")]
    UncoveredPixel { row: usize, col: usize },

    /// A sample value cannot be represented in the target format.
    #[error("value out of range: {0}")]
    ValueOutOfRange(String),

    /// Every candidate weight vanished, so no estimate can be formed.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A PGM/PFM stream violates its format.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// The file is not an index file at all (magic mismatch).
    #[error("{path} is not an index file")]
    NotAnIndexFile { path: PathBuf },

    /// The index file has a version this build does not understand.
    #[error("unsupported index version {found} in {path} (expected {expected})")]
    UnsupportedIndexVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    /// The index file ends before its declared contents do.
    #[error("truncated index file {path}")]
    TruncatedIndex { path: PathBuf },

    /// The index file is structurally self-contradictory.
    #[error("inconsistent index file {path}: {reason}")]
    InconsistentIndex { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
