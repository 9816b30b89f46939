use std::path::PathBuf;

/// Errors produced by ingestion, metric kernels and the analysis stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("source `{source_id}` is mapped to both `{first}` and `{second}`")]
    CommunityConflict {
        source_id: String,
        first: String,
        second: String,
    },

    #[error("dataset is empty after dropping zero-count records")]
    EmptyDataset,

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("unknown community `{0}`")]
    UnknownCommunity(String),

    /// The input has no mass to compute on (all-zero counts and similar).
    #[error("undefined input: {0}")]
    UndefinedInput(String),

    /// Inputs contradict each other, e.g. `|U_m| = 0` for a source the user
    /// interacted with.
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An analysis is mathematically undefined for this input (constant
    /// values, zero separation between clusters, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
