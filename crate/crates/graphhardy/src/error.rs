//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph construction: {0}")]
    Graph(String),
    #[error("graph is disconnected: vertex {0} is unreachable")]
    Disconnected(u32),
    #[error("vertex {0} has no loop, property Delta(alpha) fails")]
    MissingLoop(u32),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
