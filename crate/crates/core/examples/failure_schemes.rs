//! The same run under the three failure-information encodings. Routes and
//! values match; only the attached failure information differs.
//!
//! ```text
//! cargo run --example failure_schemes
//! ```

use ftcoll::cli::run_and_check;
use ftcoll::collectives::Scheme;
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::{check_scheme_equivalence, Scenario};
use ftcoll::trace::EventKind;
use ftcoll::Phase;

fn main() -> ftcoll::Result<()> {
    let base = Scenario {
        script: FailureScript::new()
            .with(3, FailurePoint::Preoperational)
            .with(6, FailurePoint::AfterSends(1)),
        ..Scenario::new(11, 2)
    };

    let mut traces = Vec::new();
    for scheme in Scheme::ALL {
        let (exec, verdict) = run_and_check(&Scenario { scheme, ..base.clone() })?;
        println!("{scheme}: {}", verdict.render().lines().last().unwrap_or(""));
        traces.push(exec.trace);
    }

    println!();
    println!("{:>6} {:>4}  {:<16} {:<16} {:<16}", "from", "to", "list", "count", "bit");
    let tree_sends = |i: usize| {
        traces[i]
            .iter()
            .filter(|e| e.kind == EventKind::Send && e.phase == Some(Phase::Tree))
            .map(|e| (e.actor, e.peer, e.note_field("fi").unwrap_or("").to_string()))
            .collect::<Vec<_>>()
    };
    let (list, count, bit) = (tree_sends(0), tree_sends(1), tree_sends(2));
    for ((l, c), b) in list.iter().zip(&count).zip(&bit) {
        println!("{:>6} {:>4}  {:<16} {:<16} {:<16}", l.0, l.1.unwrap_or(0), l.2, c.2, b.2);
    }

    println!();
    println!("{}", check_scheme_equivalence(&traces[0], &traces[1], &traces[2]));
    Ok(())
}
