//! Seven processes, f = 1, process 1 dead before the start, inputs equal to
//! the process ids. The root ends up with 0+2+3+4+5+6 = 20.
//!
//! ```text
//! cargo run --example worked_example
//! ```

use ftcoll::cli::run_and_check;
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::{Inputs, Scenario};
use ftcoll::topology::build_if_tree;
use ftcoll::trace::EventKind;

fn main() -> ftcoll::Result<()> {
    let s = Scenario {
        inputs: Inputs::Ids,
        script: FailureScript::new().with(1, FailurePoint::Preoperational),
        ..Scenario::new(7, 1)
    };

    let tree = build_if_tree(s.n, s.f);
    for p in 0..s.n {
        println!("process {p}: parent {:?}, children {:?}", tree.parent_of(p), tree.children_of(p));
    }
    println!();

    let (exec, verdict) = run_and_check(&s)?;
    for e in exec.trace.iter().filter(|e| matches!(e.kind, EventKind::Send | EventKind::ConfirmFailed)) {
        println!("{e}");
    }
    println!();
    println!("root result: {}", exec.value(s.root).unwrap_or("-"));
    print!("{}", verdict.render());
    Ok(())
}
