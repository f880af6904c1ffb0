use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scan: {len} bytes is not a multiple of 16")]
    MalformedScan { len: usize },

    #[error("label mismatch: expected {expected} labels, found {found}")]
    LabelMismatch { expected: usize, found: usize },

    #[error("label overflow at point {index}: sem={sem} inst={inst} does not fit in 16 bits")]
    LabelOverflow { index: usize, sem: u32, inst: u32 },

    #[error("missing calibration key `{0}`")]
    MissingCalibration(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid split ratio {0}: must be in (0, 1]")]
    InvalidRatio(f64),

    #[error("missing pseudo label for frame `{frame}` (expected {path})")]
    MissingPseudo { frame: String, path: PathBuf },

    #[error("invalid point {index}: non-finite coordinate")]
    InvalidPoint { index: usize },

    #[error("invalid voxel index ({0}, {1}, {2}) for grid")]
    InvalidIndex(usize, usize, usize),

    #[error("cylinder-mix requires labeled inputs")]
    UnlabeledInput,

    #[error("need at least 2 frames to pair, got {0}")]
    NotEnoughFrames(usize),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("anchor ({h}, {w}) lies outside the {height}x{width} image")]
    InvalidAnchor {
        h: f64,
        w: f64,
        height: usize,
        width: usize,
    },

    #[error("class id {class} out of range for {num_classes} classes")]
    InvalidClass { class: u32, num_classes: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed tensor: {0}")]
    MalformedTensor(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
