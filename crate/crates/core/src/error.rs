use thiserror::Error;

/// Errors produced while loading data, building models, sampling or
/// post-processing chains.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },
    #[error("subject row {row} references unknown cluster `{cluster}`")]
    UnknownCluster { row: usize, cluster: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("initialization failed: {0}")]
    Initialization(String),
    #[error("sampler diverged at iteration {iteration}: {message}")]
    Divergence { iteration: usize, message: String },
    #[error("chain contains no retained draws")]
    EmptyChain,
    #[error("malformed chain file {path}: {message}")]
    ChainFormat { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// True for errors caused by the input data rather than configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::InvalidRow { .. }
                | Error::UnknownCluster { .. }
                | Error::Csv(_)
        )
    }
}
