use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {time} is not a point of the partition")]
    Lookup { time: f64 },

    #[error("invalid covariance model: {0}")]
    ModelInvalid(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("statistic returned non-finite value {value} at sample {index}")]
    NonFinite { index: usize, value: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
