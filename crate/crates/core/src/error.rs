use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Lengths or dimensions do not fit together.
    #[error("size error: {0}")]
    Size(String),
    /// A value lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index error: {0}")]
    Index(String),
    /// An operation was applied to an object in the wrong state.
    #[error("state error: {0}")]
    State(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
