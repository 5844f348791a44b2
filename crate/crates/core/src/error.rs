use thiserror::Error;

/// Errors raised by model construction, references, constraints and the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A parameter set or config file is inconsistent.
    #[error("config error: {0}")]
    Config(String),
    /// A model matrix could not be formed (singular denominator, non-finite entry).
    #[error("model error: {0}")]
    Model(String),
    /// Matrix or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(String),
    /// A measurement or intermediate value was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
