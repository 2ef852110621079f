//! Allreduce with the first root candidate dead. The first reduce finds no
//! broadcast coming, the next candidate takes over, and every live process
//! ends with the same value.
//!
//! ```text
//! cargo run --example allreduce_rotation
//! ```

use std::collections::BTreeSet;

use ftcoll::cli::run_and_check;
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::{Collective, Scenario};
use ftcoll::trace::EventKind;

fn main() -> ftcoll::Result<()> {
    let s = Scenario {
        collective: Collective::Allreduce,
        script: FailureScript::new().with(0, FailurePoint::Preoperational),
        ..Scenario::new(10, 2)
    };
    let (exec, verdict) = run_and_check(&s)?;

    let mut per_op: Vec<(u64, String, usize)> = Vec::new();
    for e in exec.trace.iter().filter(|e| e.kind == EventKind::Send) {
        let (op, phase) = (e.op.map_or(0, |o| o.0), e.phase.map(|p| p.to_string()).unwrap_or_default());
        match per_op.iter_mut().find(|(o, ph, _)| *o == op && *ph == phase) {
            Some(slot) => slot.2 += 1,
            None => per_op.push((op, phase, 1)),
        }
    }
    for (op, phase, count) in per_op {
        println!("op {op:>3} {phase:<22} {count} sends");
    }

    let values: BTreeSet<_> = (1..s.n).filter_map(|p| exec.value(p)).collect();
    println!("values at live processes: {values:?}");
    print!("{}", verdict.render());
    Ok(())
}
