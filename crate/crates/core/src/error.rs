use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("value {value} of `{name}` is outside [{low}, {high}]")]
    Range {
        name: String,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed data: {0}")]
    Decode(String),
}

pub type Result<T> = core::result::Result<T, Error>;
