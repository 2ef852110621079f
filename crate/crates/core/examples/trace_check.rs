//! Traces are plain text. This one is saved, reloaded, judged, then
//! doctored so the root delivers twice, and judged again.
//!
//! ```text
//! cargo run --example trace_check
//! ```

use ftcoll::cli::{judge, run_sim};
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::Scenario;
use ftcoll::trace::{EventKind, Trace};

fn main() -> ftcoll::Result<()> {
    let s = Scenario { script: FailureScript::new().with(5, FailurePoint::AfterSends(1)), ..Scenario::new(8, 1) };
    let text = run_sim(&s)?.trace.render();
    println!("{} trace lines, first:\n  {}", text.lines().count(), text.lines().next().unwrap_or(""));

    let trace = Trace::parse(&text)?;
    println!("\nas recorded:\n{}", judge(&s, &trace)?.render());

    let mut doctored = trace.clone();
    let deliver = doctored.iter().find(|e| e.kind == EventKind::Deliver && e.actor == s.root).cloned().expect("root delivers");
    doctored.events.push(ftcoll::trace::TraceEvent { seq: doctored.events.len() as u64, ..deliver });
    println!("\nwith a second deliver:\n{}", judge(&s, &doctored)?.render());
    Ok(())
}
