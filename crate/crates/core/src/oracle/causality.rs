//! Happens-before over a trace, built from per-process event order and
//! send/receive matching. The k-th receive on a `(from, to, op, phase)`
//! channel matches the k-th send on it, which holds because channels are
//! FIFO.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::trace::{EventKind, Trace};
use crate::types::{OpId, Phase, ProcessId};

type ChannelKey = (ProcessId, ProcessId, Option<OpId>, Option<Phase>);

/// Vector clocks for every event of a trace, indexed like `trace.events`.
#[derive(Debug, Clone)]
pub struct HappensBefore {
    clocks: Vec<Vec<u32>>,
    actors: Vec<ProcessId>,
}

impl HappensBefore {
    pub fn build(trace: &Trace) -> Result<Self> {
        let events = &trace.events;
        let width = events
            .iter()
            .map(|e| e.actor.max(e.peer.unwrap_or(0)) + 1)
            .max()
            .unwrap_or(0);

        let mut per_actor: Vec<Vec<usize>> = vec![Vec::new(); width];
        let mut order: Vec<usize> = (0..events.len()).collect();
        order.sort_by_key(|&i| (events[i].actor, events[i].seq));
        for i in order {
            per_actor[events[i].actor].push(i);
        }

        let mut clocks: Vec<Vec<u32>> = vec![Vec::new(); events.len()];
        let mut cursor = vec![0usize; width];
        let mut sends: HashMap<ChannelKey, Vec<usize>> = HashMap::new();
        let mut received: HashMap<ChannelKey, usize> = HashMap::new();
        let mut waiting: HashMap<ChannelKey, Vec<ProcessId>> = HashMap::new();
        let mut ready: Vec<ProcessId> = (0..width).collect();

        while let Some(a) = ready.pop() {
            while let Some(&idx) = per_actor[a].get(cursor[a]) {
                let e = &events[idx];
                let mut clock = match cursor[a] {
                    0 => vec![0; width],
                    c => clocks[per_actor[a][c - 1]].clone(),
                };
                if e.kind == EventKind::Recv {
                    let from = e.peer.ok_or_else(|| Error::MalformedTrace(format!("receive without peer at seq {}", e.seq)))?;
                    let key = (from, a, e.op, e.phase);
                    let k = received.get(&key).copied().unwrap_or(0);
                    let Some(&send) = sends.get(&key).and_then(|s| s.get(k)) else {
                        waiting.entry(key).or_default().push(a);
                        break;
                    };
                    received.insert(key, k + 1);
                    for (c, s) in clock.iter_mut().zip(&clocks[send]) {
                        *c = (*c).max(*s);
                    }
                }
                clock[a] += 1;
                clocks[idx] = clock;
                cursor[a] += 1;
                if e.kind == EventKind::Send {
                    let to = e.peer.ok_or_else(|| Error::MalformedTrace(format!("send without peer at seq {}", e.seq)))?;
                    let key = (a, to, e.op, e.phase);
                    sends.entry(key).or_default().push(idx);
                    if let Some(w) = waiting.remove(&key) {
                        ready.extend(w);
                    }
                }
            }
        }

        if let Some(a) = (0..width).find(|&a| cursor[a] < per_actor[a].len()) {
            let e = &events[per_actor[a][cursor[a]]];
            return Err(Error::MalformedTrace(format!("receive at seq {} has no matching send", e.seq)));
        }
        Ok(HappensBefore { clocks, actors: events.iter().map(|e| e.actor).collect() })
    }

    /// Whether event `a` happens before event `b` (or is `b`).
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        let actor = self.actors[a];
        self.clocks[a][actor] <= self.clocks[b][actor]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(lines: &[&str]) -> Trace {
        Trace::parse(&lines.join("\n")).unwrap()
    }

    #[test]
    fn message_orders_events_across_processes() {
        let t = trace(&[
            "seq=0 time=0 kind=init actor=0 peer=- op=1 phase=- note=reduce root=1",
            "seq=1 time=0 kind=init actor=1 peer=- op=1 phase=- note=reduce root=1",
            "seq=2 time=0 kind=send actor=0 peer=1 op=1 phase=tree note=value=1 fi=list{}",
            "seq=3 time=3 kind=recv actor=1 peer=0 op=1 phase=tree note=value=1 fi=list{}",
            "seq=4 time=3 kind=deliver actor=1 peer=- op=1 phase=- note=reduce value=3",
        ]);
        let hb = HappensBefore::build(&t).unwrap();
        assert!(hb.precedes(0, 4));
        assert!(hb.precedes(1, 4));
        assert!(!hb.precedes(4, 0));
        assert!(!hb.precedes(1, 2));
    }

    #[test]
    fn reordering_keeps_relation() {
        let t = trace(&[
            "seq=3 time=3 kind=recv actor=1 peer=0 op=1 phase=tree note=value=1 fi=list{}",
            "seq=0 time=0 kind=init actor=0 peer=- op=1 phase=- note=reduce root=1",
            "seq=2 time=0 kind=send actor=0 peer=1 op=1 phase=tree note=value=1 fi=list{}",
        ]);
        let hb = HappensBefore::build(&t).unwrap();
        assert!(hb.precedes(1, 0));
    }

    #[test]
    fn orphan_receive_is_malformed() {
        let t = trace(&["seq=0 time=3 kind=recv actor=1 peer=0 op=1 phase=tree note=value=1 fi=list{}"]);
        assert!(matches!(HappensBefore::build(&t), Err(Error::MalformedTrace(_))));
    }
}
