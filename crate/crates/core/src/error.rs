use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid bid: {0}")]
    InvalidBid(String),

    #[error("invalid utility model: {0}")]
    InvalidUtility(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    OutOfRange(String),

    #[error("protocol violation by {actor} at round {round}: {reason}")]
    ProtocolViolation {
        actor: String,
        round: u32,
        reason: String,
    },

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("degenerate criterion: {0}")]
    DegenerateCriterion(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("outcome space too large: {size} > budget {cap}")]
    Budget { size: u64, cap: u64 },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
