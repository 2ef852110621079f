//! Fail-stop failure scripts and the failure-monitor contract.
//!
//! A scripted process stops for good at a fixed point of its own execution:
//! either before the operation starts, or when it attempts the send that
//! follows `s` successful protocol sends. Sends are atomic.

use std::collections::BTreeMap;
use std::fmt;

use crate::types::ProcessId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailurePoint {
    /// Failed before calling init; contributes nothing.
    Preoperational,
    /// Calls init, completes `s` sends, and dies on the next attempt.
    AfterSends(usize),
}

impl fmt::Display for FailurePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailurePoint::Preoperational => f.write_str("pre"),
            FailurePoint::AfterSends(s) => write!(f, "after-sends {s}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailureScript {
    entries: BTreeMap<ProcessId, FailurePoint>,
}

impl FailureScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, p: ProcessId, point: FailurePoint) -> Self {
        self.entries.insert(p, point);
        self
    }

    pub fn insert(&mut self, p: ProcessId, point: FailurePoint) {
        self.entries.insert(p, point);
    }

    pub fn get(&self, p: ProcessId) -> Option<FailurePoint> {
        self.entries.get(&p).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ProcessId, FailurePoint)> + '_ {
        self.entries.iter().map(|(&p, &fp)| (p, fp))
    }

    pub fn is_preoperational(&self, p: ProcessId) -> bool {
        self.get(p) == Some(FailurePoint::Preoperational)
    }
}

impl FromIterator<(ProcessId, FailurePoint)> for FailureScript {
    fn from_iter<I: IntoIterator<Item = (ProcessId, FailurePoint)>>(iter: I) -> Self {
        FailureScript { entries: iter.into_iter().collect() }
    }
}

/// Whether `p` is dead by the time it attempts its `(sent_so_far + 1)`-th send.
pub fn fails_before_sending(script: &FailureScript, p: ProcessId, sent_so_far: usize) -> bool {
    match script.get(p) {
        None => false,
        Some(FailurePoint::Preoperational) => true,
        Some(FailurePoint::AfterSends(s)) => sent_so_far >= s,
    }
}

/// Answers "has this peer failed?" for the owning process.
///
/// Implementations never confirm a live process (accuracy), eventually
/// confirm every failed one (completeness), and never retract a
/// confirmation (monotonicity).
pub trait FailureMonitor {
    fn confirm_failed(&self, p: ProcessId) -> bool;
}
