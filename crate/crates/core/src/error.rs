use std::path::PathBuf;

use crate::mcn::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("agent count {0} outside supported range 1..=64")]
    AgentCount(usize),

    #[error("invalid rule set: {}", format_violations(.0))]
    InvalidRuleSet(Vec<Violation>),

    #[error("{op} enumerates over {m} agents, limit is {max}")]
    EnumerationLimit { op: &'static str, m: usize, max: usize },

    #[error("total rule weight is zero, index normalization undefined")]
    ZeroTotalWeight,

    #[error("agent {agent} is not a member of the coalition")]
    AgentNotInCoalition { agent: usize },

    #[error("agent index {agent} out of range for {m} agents")]
    AgentOutOfRange { agent: usize, m: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("datapoint {index}: {source}")]
    Datapoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("corrupt file {}: {reason}", .path.display())]
    Corrupt { path: PathBuf, reason: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
