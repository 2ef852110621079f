//! Fault-tolerant reduce, broadcast, and allreduce.
//!
//! Every function here is generic over [`Transport`], so the same code runs
//! in the simulator and over sockets. Ids handed to the transport are
//! physical ranks; the topology is evaluated on logical ids in which the
//! operation's root is 0.

pub mod allreduce;
pub mod broadcast;
pub mod failinfo;
pub mod reduce;

pub use allreduce::{allreduce, successor, AllreduceMsg};
pub use broadcast::broadcast;
pub use failinfo::{merge_failure_info, FailureInfo, Scheme};
pub use reduce::{reduce, reduce_non_root, reduce_root, root_combine, up_correction, RootState};

use crate::types::{OpId, ProcessId};

/// Describes who takes part. All `n` processes always participate; the
/// generation tag distinguishes successive incarnations of the same set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Participants {
    pub n: usize,
    pub generation: u32,
}

impl Participants {
    pub fn all(n: usize) -> Self {
        Participants { n, generation: 0 }
    }
}

/// Identifies one reduce invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReduceMsg {
    pub op: OpId,
    pub participants: Participants,
}

impl ReduceMsg {
    pub fn new(op: OpId, n: usize) -> Self {
        ReduceMsg { op, participants: Participants::all(n) }
    }
}

#[derive(Debug, Clone)]
pub struct Config<R> {
    /// Number of failures to tolerate.
    pub f: usize,
    pub scheme: Scheme,
    pub reduction: R,
    /// Allreduce root candidates, tried in order. Must be processes that
    /// can only fail before the operation.
    pub candidates: Vec<ProcessId>,
}

impl<R> Config<R> {
    /// Defaults: list scheme, candidates `0..=f` (clipped to `n`).
    pub fn new(n: usize, f: usize, reduction: R) -> Self {
        Config { f, scheme: Scheme::List, reduction, candidates: default_candidates(n, f) }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_candidates(mut self, candidates: Vec<ProcessId>) -> Self {
        self.candidates = candidates;
        self
    }
}

/// The first `f + 1` ranks, or all of them when `n <= f`.
pub fn default_candidates(n: usize, f: usize) -> Vec<ProcessId> {
    (0..(f + 1).min(n)).collect()
}
