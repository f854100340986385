use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed model, field law or configuration.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Argument outside the domain of the operation.
    #[error("out of domain: {0}")]
    Domain(String),
    /// Problem size beyond what the exhaustive/dense paths support.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
