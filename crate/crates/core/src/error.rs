use crate::types::ProcessId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Every child of the root failed or reported a failure in its subtree.
    /// Only reachable with more than `f` failures.
    #[error("no failure-free subtree")]
    NoFailureFreeSubtree,

    #[error("all candidate senders failed")]
    AllFailed,

    #[error("broadcast root {0} failed")]
    RootFailed(ProcessId),

    #[error("root candidates exhausted")]
    CandidatesExhausted,

    #[error("failure information scheme mismatch")]
    SchemeMismatch,

    #[error("malformed frame: {0}")]
    MalformedFrame(String),

    #[error("unsupported frame version {0}")]
    VersionMismatch(u8),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },

    #[error("deadlock detected, blocked processes: {blocked:?}")]
    Deadlock { blocked: Vec<ProcessId> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
