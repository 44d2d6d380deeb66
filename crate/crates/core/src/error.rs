use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: {len} samples, need at least {frame_len}")]
    InputTooShort { len: usize, frame_len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate power: {0}")]
    DegeneratePower(&'static str),

    #[error("negative input to {0}")]
    NegativeInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported audio in {}: {msg}", path.display())]
    UnsupportedAudio { path: PathBuf, msg: String },

    #[error("not a model file")]
    NotAModel,

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("empty model bank")]
    EmptyBank,

    #[error("t_passes must be at least 1")]
    ZeroPasses,

    #[error("{0}")]
    Metric(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
