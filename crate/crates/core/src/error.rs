use std::path::PathBuf;

/// Errors produced by the summarization engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error("invalid {field}: {msg}")]
    Invariant { field: String, msg: String },
    #[error("non-finite value in {name}")]
    NonFinite { name: String },
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            what,
            msg: msg.into(),
        }
    }
}
