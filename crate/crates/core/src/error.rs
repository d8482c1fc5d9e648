use std::path::PathBuf;

/// Errors raised across the crate.
///
/// Contract violations (wrong dimensions, out-of-range actions, stepping a
/// finished episode) are reported as values rather than panics so that the
/// CLI can surface them cleanly.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the surface bounds")]
    OutOfBounds { point: Vec<f64> },

    #[error("action component {index} = {value} is outside [-1, 1]")]
    ActionOutOfRange { index: usize, value: f64 },

    #[error("episode already finished; call reset before stepping")]
    EpisodeFinished,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {tensor}")]
    NonFinite { tensor: String },

    #[error("unknown surface `{id}` (known: {})", known.join(", "))]
    UnknownSurface { id: String, known: Vec<String> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("configuration error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("checkpoint format `{found}` is not supported (expected `{expected}`)")]
    CheckpointVersion { found: String, expected: String },

    #[error("maze construction failed: {0}")]
    Maze(String),

    #[error("no wall-free path connects start and goal")]
    NoPath,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
