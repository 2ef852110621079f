//! Reduce: up-correction inside groups, then an ordinary tree reduction
//! over the I(f)-tree, and a root that picks the first child reporting a
//! failure-free subtree.

use crate::collectives::failinfo::{merge_failure_info, FailureInfo};
use crate::collectives::{Config, ReduceMsg};
use crate::error::{Error, Result};
use crate::topology::{build_if_tree, correction_group, subtree_index, CorrectionGroup, IfTree, Renumbering};
use crate::transport::{Envelope, Milestone, Payload, Received, Transport};
use crate::types::{Phase, ProcessId};
use crate::value::{Reduction, Value};

fn envelope<V>(
    msg: &ReduceMsg,
    from: ProcessId,
    to: ProcessId,
    phase: Phase,
    value: V,
    failinfo: FailureInfo,
) -> Envelope<V> {
    Envelope { op: msg.op, from, to, phase, payload: Payload { value, failinfo } }
}

/// Exchanges inputs with every other member of the caller's correction
/// group, ascending, send before receive. What goes out is always the
/// caller's original input, never the running accumulator: re-sending the
/// accumulator would count partner inputs twice further up the tree.
///
/// Processes outside any group get their input back unchanged.
pub async fn up_correction<V, R, T>(
    net: &T,
    data: V,
    msg: &ReduceMsg,
    root: ProcessId,
    cfg: &Config<R>,
) -> (V, FailureInfo)
where
    V: Value,
    R: Reduction<V>,
    T: Transport<V>,
{
    let renum = Renumbering::new(root);
    let me = renum.to_logical(net.rank());
    let mut failinfo = FailureInfo::empty(cfg.scheme);
    let group = correction_group(me, msg.participants.n, cfg.f).expect("caller validated rank");
    let Some(group) = group else {
        return (data, failinfo);
    };

    let mut acc = data.clone();
    for peer in group.peers(me) {
        let peer = renum.to_physical(peer);
        let blank = FailureInfo::empty(cfg.scheme);
        net.send(envelope(msg, net.rank(), peer, Phase::UpCorrection, data.clone(), blank))
            .await;
        match net.recv_from(peer, msg.op, Phase::UpCorrection).await {
            Received::Message(env) => acc = cfg.reduction.combine(&acc, &env.payload.value),
            Received::SenderFailed => failinfo.record_partner_failure(peer),
        }
    }
    (acc, failinfo)
}

pub async fn reduce_non_root<V, R, T>(
    net: &T,
    data: V,
    msg: &ReduceMsg,
    root: ProcessId,
    tree: &IfTree,
    cfg: &Config<R>,
) -> Result<()>
where
    V: Value,
    R: Reduction<V>,
    T: Transport<V>,
{
    let renum = Renumbering::new(root);
    let me = renum.to_logical(net.rank());
    let (mut acc, mut failinfo) = up_correction(net, data, msg, root, cfg).await;

    for &child in tree.children_of(me) {
        let child = renum.to_physical(child);
        match net.recv_from(child, msg.op, Phase::Tree).await {
            Received::Message(env) => {
                acc = cfg.reduction.combine(&acc, &env.payload.value);
                failinfo = merge_failure_info(&failinfo, &env.payload.failinfo)?;
            }
            Received::SenderFailed => failinfo.record_child_failure(child),
        }
    }

    let parent = renum.to_physical(tree.parent_of(me).expect("non-root has a parent"));
    net.send(envelope(msg, net.rank(), parent, Phase::Tree, acc, failinfo)).await;
    net.record(Milestone::Deliver, msg.op, "reduce".into());
    Ok(())
}

/// What the root knows after its own up-correction.
#[derive(Debug, Clone)]
pub struct RootState<V> {
    pub own_input: V,
    /// Own input folded with whatever the root's group sent.
    pub accumulator: V,
    /// Root's correction group in logical ids, if it has one.
    pub group: Option<CorrectionGroup>,
    pub f: usize,
}

/// Completes a clean subtree's result with what that subtree is missing.
///
/// An ungrouped root adds its own input. A grouped root returns the value
/// as-is when some member of its group lives in the sender's subtree (the
/// group's inputs, including the root's, already flowed up there), and
/// otherwise adds its accumulator, which holds exactly the group's inputs.
pub fn root_combine<V, R: Reduction<V>>(
    received: &V,
    sender: ProcessId,
    state: &RootState<V>,
    reduction: &R,
) -> V
where
    V: Clone,
{
    let Some(group) = &state.group else {
        return reduction.combine(&state.own_input, received);
    };
    let k = subtree_index(sender, state.f).expect("sender is a root child");
    let covered = group
        .members
        .iter()
        .any(|&m| m != 0 && subtree_index(m, state.f).ok() == Some(k));
    if covered {
        received.clone()
    } else {
        reduction.combine(&state.accumulator, received)
    }
}

pub async fn reduce_root<V, R, T>(
    net: &T,
    data: V,
    msg: &ReduceMsg,
    root: ProcessId,
    tree: &IfTree,
    cfg: &Config<R>,
) -> Result<V>
where
    V: Value,
    R: Reduction<V>,
    T: Transport<V>,
{
    let renum = Renumbering::new(root);
    let n = msg.participants.n;
    if n == 1 {
        net.record(Milestone::Deliver, msg.op, format!("reduce value={data}"));
        return Ok(data);
    }

    let group = correction_group(0, n, cfg.f)?;
    let accumulator = if group.is_some() {
        up_correction(net, data.clone(), msg, root, cfg).await.0
    } else {
        data.clone()
    };
    let state = RootState { own_input: data, accumulator, group, f: cfg.f };

    let mut pending: Vec<ProcessId> = tree.children_of(0).iter().map(|&c| renum.to_physical(c)).collect();
    loop {
        let (child, received) = net
            .recv_any(&pending, msg.op, &[Phase::Tree])
            .await
            .map_err(|_| Error::NoFailureFreeSubtree)?;
        pending.retain(|&c| c != child);
        let Received::Message(env) = received else { continue };

        let k = renum.to_logical(child);
        let in_subtree = |p: ProcessId| {
            let l = renum.to_logical(p);
            l != 0 && subtree_index(l, cfg.f).ok() == Some(k)
        };
        if env.payload.failinfo.indicates_subtree_failure(in_subtree) {
            continue;
        }
        let result = root_combine(&env.payload.value, k, &state, &cfg.reduction);
        net.record(Milestone::Deliver, msg.op, format!("reduce value={result}"));
        return Ok(result);
    }
}

/// Entry point for every participant. Returns the result at the root and
/// `None` elsewhere.
pub async fn reduce<V, R, T>(
    net: &T,
    data: V,
    root: ProcessId,
    msg: &ReduceMsg,
    cfg: &Config<R>,
) -> Result<Option<V>>
where
    V: Value,
    R: Reduction<V>,
    T: Transport<V>,
{
    let n = msg.participants.n;
    if n != net.size() || root >= n {
        return Err(Error::invalid(format!("root {root} / n {n} do not match transport of size {}", net.size())));
    }
    net.record(Milestone::Init, msg.op, format!("reduce root={root}"));
    let tree = build_if_tree(n, cfg.f);
    if net.rank() == root {
        reduce_root(net, data, msg, root, &tree, cfg).await.map(Some)
    } else {
        reduce_non_root(net, data, msg, root, &tree, cfg).await.map(|()| None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::ReduceOp;

    #[test]
    fn ungrouped_root_adds_own_input() {
        let state = RootState { own_input: 0u64, accumulator: 0, group: None, f: 1 };
        assert_eq!(root_combine(&20, 2, &state, &ReduceOp::Sum), 20);
        let state = RootState { own_input: 5u64, accumulator: 5, group: None, f: 1 };
        assert_eq!(root_combine(&20, 2, &state, &ReduceOp::Sum), 25);
    }

    #[test]
    fn grouped_root_checks_subtree_coverage() {
        // n = 6, f = 2: root group {0, 4, 5}; 4 in subtree 1, 5 in subtree 2.
        let group = correction_group(0, 6, 2).unwrap();
        let state = RootState { own_input: 1u64, accumulator: 1 + 16 + 32, group, f: 2 };
        assert_eq!(root_combine(&63, 1, &state, &ReduceOp::Sum), 63);
        assert_eq!(root_combine(&63, 2, &state, &ReduceOp::Sum), 63);
        // Subtree 3 = {3} holds none of the group.
        assert_eq!(root_combine(&(2 + 4 + 8), 3, &state, &ReduceOp::Sum), 63);
    }
}
