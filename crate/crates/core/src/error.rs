use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed input: {detail}")]
    MalformedLine { line: usize, detail: String },

    #[error("line {line}: feature index {index} does not follow {previous}")]
    NonAscendingIndex {
        line: usize,
        previous: usize,
        index: usize,
    },

    #[error("line {line}: non-finite value")]
    NonFiniteValue { line: usize },

    #[error("binary task expects at most two distinct labels, found {found}")]
    LabelArityMismatch { found: usize },

    #[error("invalid range [{lo}, {hi}]: {detail}")]
    InvalidRange { lo: f64, hi: f64, detail: String },

    #[error("feature index {index} exceeds model dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("k = {k} exceeds the {available} available neighbors")]
    KTooLarge { k: usize, available: usize },

    #[error("empty neighbor set")]
    EmptyNeighbors,

    #[error("normal equations are singular")]
    SingularSystem,

    #[error("empty k grid")]
    EmptyGrid,

    #[error("loss became non-finite at iteration {iteration}; the learning rate is likely too large")]
    NonFiniteLoss { iteration: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("task mismatch: expected {expected}, got {got}")]
    TaskMismatch { expected: String, got: String },

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(String),

    #[error("dataset not found: {0}")]
    DatasetNotFound(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Coarse grouping used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MalformedLine { .. }
            | Error::NonAscendingIndex { .. }
            | Error::NonFiniteValue { .. }
            | Error::LabelArityMismatch { .. }
            | Error::IndexOutOfRange { .. }
            | Error::LengthMismatch { .. }
            | Error::Empty(_)
            | Error::TaskMismatch { .. }
            | Error::ModelFormat(_)
            | Error::UnsupportedVersion(_)
            | Error::DatasetNotFound(_)
            | Error::Io(_) => ErrorKind::Data,
            Error::SingularSystem | Error::NonFiniteLoss { .. } | Error::EmptyNeighbors => {
                ErrorKind::Numeric
            }
            Error::InvalidRange { .. }
            | Error::KTooLarge { .. }
            | Error::EmptyGrid
            | Error::InvalidParameter(_)
            | Error::ConfigInvalid(_) => ErrorKind::Config,
        }
    }
}
