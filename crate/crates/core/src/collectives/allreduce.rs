//! Allreduce as reduce to a candidate root followed by broadcast from it,
//! retried with the next candidate whenever the broadcast reports a dead
//! root.

use crate::collectives::{broadcast, reduce, Config, Participants, ReduceMsg};
use crate::error::{Error, Result};
use crate::transport::{Milestone, Transport};
use crate::types::{OpId, ProcessId};
use crate::value::{Reduction, Value};

/// Identifies one allreduce invocation. There is no root; round `i` uses
/// sub-operation ids `op.derive(2i)` for its reduce and `op.derive(2i + 1)`
/// for its broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllreduceMsg {
    pub op: OpId,
    pub participants: Participants,
}

impl AllreduceMsg {
    pub fn new(op: OpId, n: usize) -> Self {
        AllreduceMsg { op, participants: Participants::all(n) }
    }

    pub fn reduce_op(&self, round: u64) -> OpId {
        self.op.derive(2 * round)
    }

    pub fn broadcast_op(&self, round: u64) -> OpId {
        self.op.derive(2 * round + 1)
    }
}

/// The candidate after `r` in the fixed order.
pub fn successor(r: ProcessId, candidates: &[ProcessId]) -> Result<ProcessId> {
    let pos = candidates
        .iter()
        .position(|&c| c == r)
        .ok_or_else(|| Error::invalid(format!("{r} is not a root candidate")))?;
    candidates.get(pos + 1).copied().ok_or(Error::CandidatesExhausted)
}

pub async fn allreduce<V, R, T>(net: &T, data: V, msg: &AllreduceMsg, cfg: &Config<R>) -> Result<V>
where
    V: Value,
    R: Reduction<V>,
    T: Transport<V>,
{
    let n = msg.participants.n;
    if cfg.candidates.is_empty() || cfg.candidates.iter().any(|&c| c >= n) {
        return Err(Error::invalid(format!("bad root candidates {:?} for n = {n}", cfg.candidates)));
    }
    net.record(Milestone::Init, msg.op, "allreduce".into());

    let mut root = cfg.candidates[0];
    let mut round = 0;
    loop {
        let rmsg = ReduceMsg { op: msg.reduce_op(round), participants: msg.participants };
        let partial = reduce(net, data.clone(), root, &rmsg, cfg).await?;
        match broadcast(net, partial, root, msg.broadcast_op(round), cfg).await {
            Ok(value) => {
                net.record(Milestone::Deliver, msg.op, format!("allreduce value={value} rounds={}", round + 1));
                return Ok(value);
            }
            Err(Error::RootFailed(_)) => {
                root = successor(root, &cfg.candidates)?;
                round += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successor_walks_candidates() {
        assert_eq!(successor(0, &[0, 1, 2]).unwrap(), 1);
        assert!(matches!(successor(2, &[0, 1, 2]), Err(Error::CandidatesExhausted)));
        assert!(successor(5, &[0, 1, 2]).is_err());
    }

    #[test]
    fn default_candidates_are_first_ids() {
        assert_eq!(crate::collectives::default_candidates(10, 2), vec![0, 1, 2]);
        assert_eq!(crate::collectives::default_candidates(2, 4), vec![0, 1]);
    }
}
