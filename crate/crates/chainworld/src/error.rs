use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] chainworld_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: {source}")]
    Json {
        location: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("backend unreachable after {attempts} attempts: {last}")]
    BackendUnreachable { attempts: u32, last: String },
    #[error("backend rejected the request with status {status}: {body}")]
    BackendRejected { status: u16, body: String },
    #[error("no scripted completion for fingerprint {0}")]
    ScriptMiss(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("cannot align edited plan: {0}")]
    UnparseableEdit(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Bad command-line usage detected after argument parsing.
    #[error("{0}")]
    Usage(String),
    /// A replay or endpoint check ran and found problems.
    #[error("{0}")]
    CheckFailed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Gateway failures seen through core traits, which only carry a message.
impl From<Error> for chainworld_core::Error {
    fn from(e: Error) -> Self {
        match e {
            Error::Core(inner) => inner,
            other => chainworld_core::Error::Backend(other.to_string()),
        }
    }
}
