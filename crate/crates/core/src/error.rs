use thiserror::Error;

use crate::codec::DecodeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("decode error: {0}")]
    Decode(#[from] DecodeError),
    #[error("broadcast queue full ({0} pending)")]
    Backpressure(usize),
    #[error("protocol misuse: {0}")]
    Misuse(&'static str),
    #[error("graph contract violated: {0}")]
    Graph(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
