use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Exact enumeration refused because the instance is larger than the cap.
    #[error("enumeration cap exceeded: {what} has size {size}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("configuration does not belong to this region (expected {expected} edges, got {got})")]
    RegionMismatch { expected: usize, got: usize },

    #[error("empty vertex set")]
    EmptySet,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
