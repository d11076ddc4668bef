use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spatial index over an empty point set")]
    EmptyIndex,
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: non-finite coordinate")]
    InvalidCoordinate { path: PathBuf, line: usize },
    #[error("{path}: unsupported encoding: {msg}")]
    UnsupportedEncoding { path: PathBuf, msg: String },
    #[error("instance id 0 is reserved for unassigned points")]
    ReservedId,
    #[error("invalid partition parameters: {0}")]
    InvalidPartition(String),
    #[error("invalid noise spec: {0}")]
    InvalidNoiseSpec(String),
    #[error("neighborhood of point {index} has fewer than 3 points")]
    DegenerateNeighborhood { index: usize },
    #[error("k-NN classifier has no training data")]
    NoTrainingData,
    #[error("labeling is missing required {0} labels")]
    MissingLabels(&'static str),
    #[error("point {index} carries conflicting class labels across blocks")]
    LabelConflict { index: usize },
    #[error("mu sweep needs at least one mu value")]
    InvalidSweep,
    #[error("IoU of two empty sets is undefined")]
    UndefinedIoU,
    #[error("facility has no shapes in any class")]
    EmptyFacility,
    #[error("need either per-shape minutes or observed total hours")]
    MissingRate,
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error("invalid annotation curve: {0}")]
    InvalidCurve(String),
    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
