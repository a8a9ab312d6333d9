use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported header: {0:?}")]
    Header(String),

    #[error("invalid point set: {0}")]
    InvalidPointSet(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("coordinate {value} out of range for {bits} bits per axis")]
    CoordinateRange { value: u64, bits: u32 },

    #[error("negative shifted coordinate {0} (wrong grid offset)")]
    NegativeCoordinate(f64),

    #[error("encoding overflow: {0}")]
    EncodingOverflow(String),

    #[error("no supervised points: every label is ignored")]
    EmptySupervision,

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("empty sample")]
    EmptySample,

    #[error("scene is missing {0} labels")]
    MissingLabels(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
