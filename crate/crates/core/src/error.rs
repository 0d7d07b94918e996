use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty subset")]
    EmptySubset,
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
    #[error("invalid market: {0}")]
    InvalidMarket(String),
    #[error("market mismatch: {0}")]
    MarketMismatch(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid mechanism: {0}")]
    Mechanism(String),
    #[error("preference outside domain for agent `{0}`")]
    OutsideDomain(String),
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("malformed json")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
