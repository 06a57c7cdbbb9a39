use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid prior at row {row} ({category}): {message}")]
    InvalidPrior {
        row: usize,
        category: String,
        message: String,
    },

    #[error("unknown object category `{0}`")]
    UnknownCategory(String),

    #[error("point behind the camera (z = {0})")]
    NonPositiveDepth(f64),

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("empty depth interval [{lo}, {hi}]")]
    EmptyDepthInterval { lo: f64, hi: f64 },

    #[error("not enough points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: String, expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing embedding for `{0}`")]
    MissingEmbedding(String),

    #[error("KL divergence is infinite: a3d[{index}] = 0 while a2d[{index}] = {a2d}")]
    InfiniteKl { index: usize, a2d: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("not enough visible joints for alignment: {0} common, need 3")]
    TooFewJoints(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            got,
        }
    }
}
