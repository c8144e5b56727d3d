use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    RawIo(#[from] std::io::Error),

    #[error("delimited text error: {0}")]
    Csv(#[from] csv::Error),

    #[error("mandatory field `{field}` is not mapped to a column")]
    UnmappedField { field: &'static str },

    #[error("column `{column}` (for field `{field}`) not found in header")]
    MissingColumn { field: &'static str, column: String },

    #[error("invalid column mapping: {0}")]
    Mapping(String),

    #[error("darwin core archive: {0}")]
    Archive(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("malformed {format} input: {message}")]
    Format { format: &'static str, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(format: &'static str, message: impl Into<String>) -> Self {
        Error::Format { format, message: message.into() }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }
}
