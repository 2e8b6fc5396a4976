use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: unknown {kind} `{name}` under a frozen vocabulary")]
    UnknownSymbol {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        name: String,
    },
    #[error("{kind} id {id} out of range (limit {limit})")]
    OutOfRange {
        kind: &'static str,
        id: usize,
        limit: usize,
    },
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("path is not contiguous at edge {position}")]
    NonContiguousPath { position: usize },
    #[error("path enumeration exceeded the cap of {cap} walks")]
    BudgetExceeded { cap: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sample {sample} holds {size} elements, fewer than k = {k}")]
    SampleTooSmall { sample: usize, size: usize, k: usize },
    #[error("negative id {0} passed to unique")]
    NegativeId(i64),
    #[error("path of length {length} exceeds the {recorded} recorded steps")]
    PathTooLong { length: usize, recorded: usize },
    #[error("non-finite loss {loss} at batch {batch}")]
    NonFiniteLoss { loss: f64, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
