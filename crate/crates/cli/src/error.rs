use std::path::Path;
use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("sampler failure: {0}")]
    Divergence(String),
    #[error("data digest mismatch: {0}")]
    DigestMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::DigestMismatch(_) => 5,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Library errors raised while reading the input data files.
    pub fn data(e: frailtree::Error) -> Self {
        match e {
            frailtree::Error::InvalidArgument(_) | frailtree::Error::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<frailtree::Error> for CliError {
    fn from(e: frailtree::Error) -> Self {
        use frailtree::Error as E;
        match e {
            E::Divergence { .. } | E::Initialization(_) => CliError::Divergence(e.to_string()),
            E::ChainFormat { .. } | E::Json(_) => CliError::Data(e.to_string()),
            ref other if other.is_data_error() => CliError::Data(e.to_string()),
            E::Io(source) => CliError::Io {
                path: "<output>".into(),
                source,
            },
            other => CliError::Config(other.to_string()),
        }
    }
}
