use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("policy field `{field}` = {value} is outside its range {range}")]
    PolicyOutOfRange {
        field: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("population has no agents")]
    EmptyPopulation,

    #[error("SVI bin {0} contains no agents")]
    EmptySviBin(usize),

    #[error("covariance matrix is not positive definite after {retries} jitter retries")]
    NotPositiveDefinite { retries: usize },

    #[error("model has no fitted component for `{0}`")]
    Unfitted(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("number of active policies k = {0} must lie in 1..=10")]
    KOutOfRange(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("{file}, line {line}: {msg}")]
    Csv {
        file: String,
        line: u64,
        msg: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported schema version {found}; this build reads version {supported}")]
    SchemaVersion { found: u32, supported: u32 },

    #[error("row_id mismatch between design and outcomes: {0}")]
    RowIdMismatch(String),
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
