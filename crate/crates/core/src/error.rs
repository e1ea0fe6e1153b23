use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate {role} document id `{id}`")]
    DuplicateDocument { role: &'static str, id: String },

    #[error("document `{0}` has no tokens after tokenization")]
    EmptyDocument(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in `{0}`")]
    NonFinite(String),

    #[error("isolated node `{0}`")]
    IsolatedNode(String),

    #[error("model `{model}` failed: {source}")]
    Model {
        model: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("format: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable tag for the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DuplicateDocument { .. } => "duplicate_document",
            Error::EmptyDocument(_) => "empty_document",
            Error::UnknownId(_) => "unknown_id",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::IsolatedNode(_) => "isolated_node",
            Error::Model { .. } => "model",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
