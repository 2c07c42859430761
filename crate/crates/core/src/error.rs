use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("no pair survives threshold {threshold}")]
    EmptySplit { threshold: f64 },

    #[error("input has no tokens after truncation")]
    EmptyInput,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("index contains no documents")]
    EmptyIndex,

    #[error("unknown document `{0}`")]
    UnknownDoc(String),

    #[error("missing scorer `{0}`")]
    MissingScorer(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("feature layout mismatch: model expects {expected}, got {found}")]
    LayoutMismatch { expected: String, found: String },

    #[error("query `{0}` is not present in qrels")]
    UnknownQuery(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
