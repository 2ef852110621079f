//! Fault-tolerant reduce and allreduce for fail-stop processes.

pub mod cli;
pub mod collectives;
pub mod error;
pub mod failmodel;
pub mod oracle;
pub mod simnet;
pub mod tcpnet;
pub mod topology;
pub mod trace;
pub mod transport;
pub mod types;
pub mod value;

pub use error::{Error, Result};
pub use types::{OpId, Phase, ProcessId};
