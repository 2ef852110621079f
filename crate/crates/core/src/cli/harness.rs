//! Runs a [`Scenario`] end to end and judges the resulting trace.

use std::fmt;
use std::rc::Rc;

use crate::collectives::{allreduce, reduce, AllreduceMsg, Config, ReduceMsg};
use crate::error::Result;
use crate::oracle::{check_allreduce_trace, check_reduce_trace, Collective, Scenario, Verdict};
use crate::simnet::{Outcome, SimConfig, Simulation};
use crate::trace::Trace;
use crate::transport::Transport;
use crate::types::{OpId, ProcessId};
use crate::value::{Multiset, ReduceOp, Reduction, Value};

/// Operation id used for the single top-level collective of a run.
pub const RUN_OP: OpId = OpId(1);

/// How one process finished.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProcessResult {
    /// Returned a value (reduce root, or any allreduce participant).
    Value(String),
    /// Reduce non-root that passed its part on.
    Contributed,
    Error(String),
    Failed,
    Blocked,
}

impl fmt::Display for ProcessResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessResult::Value(v) => write!(f, "value {v}"),
            ProcessResult::Contributed => f.write_str("contributed"),
            ProcessResult::Error(e) => write!(f, "error {e}"),
            ProcessResult::Failed => f.write_str("failed"),
            ProcessResult::Blocked => f.write_str("blocked"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub trace: Trace,
    pub results: Vec<ProcessResult>,
}

impl Execution {
    /// The value returned by `p`, if any.
    pub fn value(&self, p: ProcessId) -> Option<&str> {
        match &self.results[p] {
            ProcessResult::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// Input of process `p` in the value type the scenario calls for.
pub fn input_u64(s: &Scenario, p: ProcessId) -> u64 {
    s.inputs.value(p)
}

pub fn input_multiset(s: &Scenario, p: ProcessId) -> Multiset {
    Multiset::unit(p, s.n)
}

/// The collective a single process runs for `s`.
pub async fn participate<V, T>(net: &T, s: &Scenario, data: V) -> ProcessResult
where
    V: Value,
    T: Transport<V>,
    ReduceOp: Reduction<V>,
{
    let cfg = Config::new(s.n, s.f, s.op)
        .with_scheme(s.scheme)
        .with_candidates(s.candidates.clone());
    let outcome = match s.collective {
        Collective::Reduce => reduce(net, data, s.root, &ReduceMsg::new(RUN_OP, s.n), &cfg).await,
        Collective::Allreduce => allreduce(net, data, &AllreduceMsg::new(RUN_OP, s.n), &cfg).await.map(Some),
    };
    match outcome {
        Ok(Some(v)) => ProcessResult::Value(v.to_string()),
        Ok(None) => ProcessResult::Contributed,
        Err(e) => ProcessResult::Error(e.to_string()),
    }
}

fn sim_with<V>(s: &Scenario, input: fn(&Scenario, ProcessId) -> V) -> Execution
where
    V: Value,
    ReduceOp: Reduction<V>,
{
    let config = SimConfig { seed: s.seed, latency: s.latency, start_skew: s.start_skew };
    let sim = Simulation::new(s.n, s.script.clone(), config);
    let shared = Rc::new(s.clone());
    let run = sim.run_to_quiescence(|net| {
        let s = Rc::clone(&shared);
        let data = input(&s, net.rank());
        async move { participate(&net, &s, data).await }
    });
    let results = run
        .outcomes
        .into_iter()
        .map(|o| match o {
            Outcome::Finished(r) => r,
            Outcome::Failed => ProcessResult::Failed,
            Outcome::Blocked => ProcessResult::Blocked,
        })
        .collect();
    Execution { trace: run.trace, results }
}

/// Runs `s` in the simulator. Processes left waiting show up as
/// [`ProcessResult::Blocked`] rather than as an error, so runs beyond the
/// tolerated number of failures can still be judged.
pub fn run_sim(s: &Scenario) -> Result<Execution> {
    s.validate()?;
    Ok(if s.uses_multiset() {
        sim_with(s, input_multiset)
    } else {
        sim_with(s, input_u64)
    })
}

/// Applies the checker matching the scenario's collective.
pub fn judge(s: &Scenario, trace: &Trace) -> Result<Verdict> {
    match s.collective {
        Collective::Reduce => check_reduce_trace(trace, s),
        Collective::Allreduce => check_allreduce_trace(trace, s),
    }
}

/// Simulates and judges in one step.
pub fn run_and_check(s: &Scenario) -> Result<(Execution, Verdict)> {
    let exec = run_sim(s)?;
    let verdict = judge(s, &exec.trace)?;
    Ok((exec, verdict))
}
