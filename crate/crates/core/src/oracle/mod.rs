//! Independent checkers for reduce and allreduce runs.
//!
//! Nothing in here calls into the protocol. Verdicts are computed from the
//! scenario, closed-form message counts, and the event trace alone.

mod causality;
mod check;
mod counts;
mod inclusion;

pub use causality::HappensBefore;
pub use check::{check_allreduce_trace, check_reduce_trace, check_scheme_equivalence, Check, Verdict};
pub use counts::{expected_tree_messages, expected_upcorrection_messages, max_broadcast_messages};
pub use inclusion::{acceptable_inclusion_sets, decode_inclusion, InclusionFamily};

use std::fmt;
use std::str::FromStr;

use crate::collectives::Scheme;
use crate::error::{Error, Result};
use crate::failmodel::FailureScript;
use crate::types::ProcessId;
use crate::value::ReduceOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collective {
    Reduce,
    Allreduce,
}

impl fmt::Display for Collective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Collective::Reduce => "reduce",
            Collective::Allreduce => "allreduce",
        })
    }
}

impl FromStr for Collective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reduce" => Ok(Collective::Reduce),
            "allreduce" => Ok(Collective::Allreduce),
            _ => Err(Error::invalid(format!("unknown collective `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Sim,
    Tcp,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::Sim => "sim",
            TransportKind::Tcp => "tcp",
        })
    }
}

impl FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(TransportKind::Sim),
            "tcp" => Ok(TransportKind::Tcp),
            _ => Err(Error::invalid(format!("unknown transport `{s}`"))),
        }
    }
}

/// Per-process input values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inputs {
    /// `value(p) = 2^p`: every result decodes to the set of included ranks.
    Probe,
    Ids,
    Ones,
    Values(Vec<u64>),
    /// Unit multiplicity vectors: exact counts, any `n`.
    Multiset,
}

impl Inputs {
    /// Integer input of `p`. Probe inputs need `p < 64`; multiset inputs
    /// have no integer form.
    pub fn value(&self, p: ProcessId) -> u64 {
        match self {
            Inputs::Probe => 1u64 << p,
            Inputs::Multiset => panic!("multiset inputs have no integer form"),
            Inputs::Ids => p as u64,
            Inputs::Ones => 1,
            Inputs::Values(v) => v[p],
        }
    }
}

/// Everything needed to run and to judge one execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub n: usize,
    pub f: usize,
    pub op: ReduceOp,
    pub collective: Collective,
    /// Reduce root.
    pub root: ProcessId,
    /// Allreduce root candidates, in order.
    pub candidates: Vec<ProcessId>,
    pub scheme: Scheme,
    pub seed: u64,
    pub script: FailureScript,
    pub transport: TransportKind,
    pub latency: (u64, u64),
    pub start_skew: u64,
    pub inputs: Inputs,
    pub probe_timeout_ms: u64,
    pub probe_retries: u32,
}

impl Scenario {
    pub fn new(n: usize, f: usize) -> Self {
        Scenario {
            n,
            f,
            op: ReduceOp::Sum,
            collective: Collective::Reduce,
            root: 0,
            candidates: crate::collectives::default_candidates(n, f),
            scheme: Scheme::List,
            seed: 0,
            script: FailureScript::new(),
            transport: TransportKind::Sim,
            latency: (1, 10),
            start_skew: 0,
            inputs: Inputs::Probe,
            probe_timeout_ms: 500,
            probe_retries: 3,
        }
    }

    /// Whether runs carry multiplicity vectors instead of integers. Probe
    /// inputs switch over once `2^p` no longer fits a word.
    pub fn uses_multiset(&self) -> bool {
        match self.inputs {
            Inputs::Multiset => true,
            Inputs::Probe => self.n > 64,
            _ => false,
        }
    }

    /// Failures the run is guaranteed to survive: `f`, or `n - 2` when the
    /// root has fewer than `f + 1` children and every one of them could be
    /// dead.
    pub fn tolerance(&self) -> usize {
        self.f.min(self.n.saturating_sub(2))
    }

    /// Whether the guarantees apply to this script.
    pub fn within_guarantee(&self) -> bool {
        self.script.len() <= self.tolerance()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.root >= self.n {
            return Err(Error::invalid(format!("root {} out of range", self.root)));
        }
        if self.candidates.is_empty() || self.candidates.iter().any(|&c| c >= self.n) {
            return Err(Error::invalid("candidates must be non-empty ranks below n"));
        }
        if let Some((p, _)) = self.script.iter().find(|&(p, _)| p >= self.n) {
            return Err(Error::invalid(format!("failure directive for unknown process {p}")));
        }
        if self.latency.0 > self.latency.1 {
            return Err(Error::invalid("latency min exceeds max"));
        }
        if self.uses_multiset() && self.op != ReduceOp::Sum {
            return Err(Error::invalid("multiset inputs only support sum"));
        }
        if let Inputs::Values(v) = &self.inputs {
            if v.len() != self.n {
                return Err(Error::invalid(format!("{} input values for n = {}", v.len(), self.n)));
            }
        }
        Ok(())
    }
}
