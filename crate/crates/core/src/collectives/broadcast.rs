//! Fault-tolerant broadcast over the same tree and groups as reduce.
//!
//! The value travels down the I(f)-tree. Every process that obtains it
//! forwards it to its tree children and, as down-correction, to each member
//! of its correction group it did not get the value from. The root also
//! sends directly to members of its own group that are not its children.
//! With at most `f` failures below a live root, one subtree is failure-free,
//! so every group has a member reached by the tree that floods the rest.
//!
//! Waiting processes also watch the root itself. The root can only fail
//! before the operation, so a confirmed-dead root means no value exists
//! anywhere, and every live process reports [`Error::RootFailed`].

use crate::collectives::failinfo::FailureInfo;
use crate::collectives::Config;
use crate::error::{Error, Result};
use crate::topology::{build_if_tree, correction_group, Renumbering};
use crate::transport::{Envelope, Milestone, Payload, Received, Transport};
use crate::types::{OpId, Phase, ProcessId};
use crate::value::Value;

const PHASES: [Phase; 2] = [Phase::BroadcastTree, Phase::BroadcastCorrection];

pub async fn broadcast<V, R, T>(
    net: &T,
    data: Option<V>,
    root: ProcessId,
    op: OpId,
    cfg: &Config<R>,
) -> Result<V>
where
    V: Value,
    T: Transport<V>,
{
    let n = net.size();
    if root >= n {
        return Err(Error::invalid(format!("root {root} out of range for n = {n}")));
    }
    net.record(Milestone::Init, op, format!("broadcast root={root}"));

    let renum = Renumbering::new(root);
    let me = renum.to_logical(net.rank());
    let tree = build_if_tree(n, cfg.f);
    let group = correction_group(me, n, cfg.f)?;
    let send = |to: ProcessId, phase: Phase, value: &V| {
        net.send(Envelope {
            op,
            from: net.rank(),
            to: renum.to_physical(to),
            phase,
            payload: Payload { value: value.clone(), failinfo: FailureInfo::empty(cfg.scheme) },
        })
    };

    if me == 0 {
        let value = data.ok_or_else(|| Error::invalid("broadcast root has no value"))?;
        let children = tree.children_of(0);
        for &c in children {
            send(c, Phase::BroadcastTree, &value).await;
        }
        if let Some(g) = &group {
            for m in g.peers(0).filter(|m| !children.contains(m)) {
                send(m, Phase::BroadcastCorrection, &value).await;
            }
        }
        net.record(Milestone::Deliver, op, format!("broadcast value={value}"));
        return Ok(value);
    }

    let parent = tree.parent_of(me).expect("non-root has a parent");
    let mut watch = vec![root];
    if parent != 0 {
        watch.push(renum.to_physical(parent));
    }
    if let Some(g) = &group {
        watch.extend(g.peers(me).filter(|&m| m != 0).map(|m| renum.to_physical(m)));
    }

    let (source, value) = loop {
        let (c, received) = net.recv_any(&watch, op, &PHASES).await?;
        match received {
            Received::Message(env) => break (c, env.payload.value),
            Received::SenderFailed if c == root => return Err(Error::RootFailed(root)),
            Received::SenderFailed => watch.retain(|&w| w != c),
        }
    };

    for &c in tree.children_of(me) {
        send(c, Phase::BroadcastTree, &value).await;
    }
    if let Some(g) = &group {
        let source = renum.to_logical(source);
        for m in g.peers(me).filter(|&m| m != 0 && m != source) {
            send(m, Phase::BroadcastCorrection, &value).await;
        }
    }
    net.record(Milestone::Deliver, op, format!("broadcast value={value}"));
    Ok(value)
}
