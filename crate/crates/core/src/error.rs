use thiserror::Error;

#[derive(Debug, Error)]
pub enum KstError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("construction infeasible: {0}")]
    Infeasible(String),
    #[error("depth exceeded: {0}")]
    DepthExceeded(String),
    #[error("unknown target function {0:?}")]
    UnknownFunction(String),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("document version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("inner-family hash mismatch: document expects {expected}, family has {found}")]
    HashMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = KstError> = std::result::Result<T, E>;
