use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid color: channels must be finite and non-negative, got ({r}, {g}, {b})")]
    InvalidColor { r: f64, g: f64, b: f64 },

    #[error("a patch set needs exactly 24 colors, got {0}")]
    PatchCount(usize),

    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    UnsupportedDegree(u32),

    #[error("transform matrix has {found} columns but its feature spec expects {expected}")]
    MatrixShape { expected: usize, found: usize },

    #[error("transform matrix contains a non-finite entry")]
    NonFiniteMatrix,

    #[error("checker annotation `{image_id}` is not a strictly convex quadrilateral")]
    DegenerateQuad { image_id: String },

    #[error("checker annotation `{image_id}` has corner ({x}, {y}) outside the {width}x{height} image")]
    CornerOutOfBounds {
        image_id: String,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },

    #[error("sample for patch {patch} falls outside the image at ({x:.2}, {y:.2})")]
    PatchOutOfBounds { patch: usize, x: f64, y: f64 },

    #[error("ridge weight must be finite and non-negative, got {0}")]
    InvalidRidge(f64),

    #[error("normal equations are numerically singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },

    #[error("foreground mask has no foreground pixels")]
    EmptyMask,

    #[error("mask value {value} at ({x}, {y}) is neither 0 nor 255")]
    NonBinaryMask { value: u8, x: u32, y: u32 },

    #[error("checker bounding box is outside the {width}x{height} image")]
    BboxOutOfBounds { width: u32, height: u32 },

    #[error("largest checker-free crop covers only {fraction:.3} of the image (minimum {minimum:.3})")]
    CheckerDominates { fraction: f64, minimum: f64 },

    #[error("reference pool for `{image_id}` has {available} candidates, {required} required")]
    InsufficientPool {
        image_id: String,
        available: usize,
        required: usize,
    },

    #[error("unknown image id `{0}`")]
    UnknownImage(String),

    #[error("image `{image_id}` has no foreground {fg_index}")]
    UnknownForeground { image_id: String, fg_index: usize },

    #[error("cannot read image {path}: {message}")]
    UnreadableImage { path: PathBuf, message: String },

    #[error("cannot write image {path}: {message}")]
    ImageWrite { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Pipeline(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
