use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },

    #[error("index error: {0}")]
    Index(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("template `{template}` is missing a binding for `{placeholder}`")]
    Template { template: String, placeholder: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid response: {0}")]
    InvalidResponse(String),

    #[error("step cap of {0} exceeded before the model produced an end of answer")]
    StepCapExceeded(usize),
}

/// Failures from completion or entailment backends.
#[derive(Debug, Error)]
pub enum BackendError {
    /// Network-level failure; retried up to the configured limit.
    #[error("transport error: {0}")]
    Transport(String),

    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },

    #[error("could not decode backend response: {0}")]
    Decode(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("script exhausted")]
    ScriptExhausted,

    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
}

impl BackendError {
    pub fn is_retriable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
