use thiserror::Error;

/// Errors raised by procedures, transforms, e-processes and the simulation lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("statistic kind mismatch: procedure {procedure} expects {expected}, got {got}")]
    KindMismatch {
        procedure: &'static str,
        expected: &'static str,
        got: &'static str,
    },
    #[error("invalid statistic: {0}")]
    InvalidStatistic(String),
    #[error("invalid discount sequence: {0}")]
    Discount(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("state error: {0}")]
    State(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
