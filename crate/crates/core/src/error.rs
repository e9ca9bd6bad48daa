use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("flip tracking is disabled for this run")]
    TrackingDisabled,
}

pub type Result<T> = std::result::Result<T, Error>;
