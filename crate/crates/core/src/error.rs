use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("row count mismatch: {left} vs {right}")]
    RowCountMismatch { left: usize, right: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("invalid embedding matrix: {0}")]
    InvalidMatrix(String),
    #[error("empty text at input position {0}")]
    EmptyText(usize),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {message}")]
    Provider { status: u16, message: String },
    #[error("no embedding available for text {0:?}")]
    MissingEmbedding(String),
    #[error("language identifier needs at least two profiles")]
    NoProfiles,
    #[error("no transform rule applies to {0:?}")]
    NoRuleApplicable(String),
    #[error("document {0} is empty after cleaning")]
    EmptyAfterCleaning(String),
    #[error("need at least {needed} pairs, got {found}")]
    TooFewPairs { needed: usize, found: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("unknown language {0:?}")]
    UnknownLanguage(String),
    #[error("reports cannot be compared: {0}")]
    MismatchedReports(String),
    #[error("malformed template {0:?}: expected exactly one [LABEL] placeholder")]
    MalformedTemplate(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
