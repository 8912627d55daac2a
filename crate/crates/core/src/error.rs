use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid mode {0}: modes are numbered from 1")]
    InvalidMode(u32),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("index {index} outside 1..={max}")]
    IndexOutOfRange { index: u32, max: u32 },
    #[error("coordinates {0} are not a stable equilibrium of any mode up to {1}")]
    NotAnEquilibrium(String, u32),
    #[error("node {to} is unreachable from node {from}")]
    Unreachable { from: usize, to: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
