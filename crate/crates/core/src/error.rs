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

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id {id:?} (line {line})")]
    DuplicateDocId { id: String, line: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty vocabulary: {0}")]
    EmptyVocabulary(String),

    #[error("unknown token {0:?}")]
    UnknownToken(String),

    #[error("need at least {needed} non-degenerate centroids for k-nearest neighbours, got {got}")]
    TooFewCentroids { needed: usize, got: usize },

    #[error("unknown relation type in rows: {}", .0.join("; "))]
    UnknownRelationType(Vec<String>),

    #[error("edge references missing node {0}")]
    MissingNode(String),

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("network file version mismatch: {0}")]
    Version(String),

    #[error("source and target are the same node {0}")]
    SameEndpoints(String),

    #[error("no document for cloud node {0}")]
    MissingDocument(String),

    #[error("topic index {index} out of range (model has {topics} topics)")]
    TopicOutOfRange { index: usize, topics: usize },

    #[error("pattern mismatch: {0:?} vs {1:?}")]
    PatternMismatch(String, String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("output directory is locked by another run: {0}")]
    Locked(PathBuf),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
