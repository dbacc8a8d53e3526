use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rescaled field loses {lost:.3e} relative mass past the domain edge")]
    SupportOverflow { lost: f64 },

    #[error("fiber has no finite maximizer (power term C = {c} must be negative)")]
    NoMaximizer { c: f64 },

    #[error("quantity undefined for a zero-mass field")]
    ZeroMass,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("empty fit window [{r1}, {r2}]")]
    EmptyWindow { r1: f64, r2: f64 },

    #[error("need at least {needed} trajectory samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
