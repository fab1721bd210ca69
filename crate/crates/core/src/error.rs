use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trap-length law has no finite mean under truncation: {0}")]
    Divergent(String),

    #[error("clock left the representable range after {steps} steps")]
    ClockOverflow { steps: u64 },

    #[error("at least {needed} replicas are required, got {got}")]
    TooFewReplicas { needed: usize, got: usize },

    #[error("regeneration window unusable: {0}")]
    Unresolved(String),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
