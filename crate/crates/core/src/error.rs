use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("stream set is not aligned (stream {stream} has offset {offset})")]
    NotAligned { stream: usize, offset: i32 },

    #[error("frame offsets leave no common frame range")]
    OverlapEmpty,

    #[error("n-best size {n} out of range 1..={streams}")]
    InvalidN { n: usize, streams: usize },

    #[error("analysis window too short: need {needed} frames, have {available}")]
    WindowTooShort { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid stream: {0}")]
    InvalidStream(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("autoencoder attention needs a trained model")]
    MissingModel,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergedTraining { epoch: usize },

    #[error("expected {expected} corruption profiles, got {got}")]
    ProfileMismatch { expected: usize, got: usize },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    VersionUnsupported(u16),

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("payload truncated: expected {expected} bytes, found {found}")]
    PayloadTruncated { expected: usize, found: usize },

    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: usize },

    #[error("row {row} is not a probability vector (sum {sum})")]
    InvalidSimplex { row: usize, sum: f64 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
