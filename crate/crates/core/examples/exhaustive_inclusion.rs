//! Every placement of up to f failures for one (n, f), with bit-set probe
//! inputs, and which processes each run's result actually contains.
//!
//! A process that fails partway through may or may not be counted; nobody
//! is ever counted twice.
//!
//! ```text
//! cargo run --example exhaustive_inclusion -- 9 2
//! ```

use std::collections::BTreeMap;

use ftcoll::cli::run_and_check;
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::{decode_inclusion, Inputs, Scenario};

const POINTS: [FailurePoint; 4] =
    [FailurePoint::Preoperational, FailurePoint::AfterSends(0), FailurePoint::AfterSends(1), FailurePoint::AfterSends(2)];

fn main() -> ftcoll::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("usage: exhaustive_inclusion N F"));
    let n = args.next().unwrap_or(9);
    let f = args.next().unwrap_or(2);
    let s0 = Scenario { inputs: Inputs::Probe, ..Scenario::new(n, f) };

    // Victims come from 1..n so the root stays live.
    let mut scripts = vec![FailureScript::new()];
    for _ in 0..s0.tolerance() {
        let grown: Vec<FailureScript> = scripts
            .iter()
            .flat_map(|s| {
                let last = s.iter().map(|(p, _)| p).max().unwrap_or(0);
                (last + 1..n).flat_map(move |p| POINTS.into_iter().map(move |pt| s.clone().with(p, pt)))
            })
            .collect();
        scripts.extend(grown);
    }

    // How often an inoperational victim made it into the result, by send count.
    let mut included: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for script in &scripts {
        let s = Scenario { script: script.clone(), ..s0.clone() };
        let (exec, verdict) = run_and_check(&s)?;
        assert!(verdict.pass(), "{script:?}\n{}", verdict.render());
        let counts = decode_inclusion(&s, exec.value(0).expect("live root delivers")).expect("probe decodes");
        for (p, point) in script.iter() {
            if let FailurePoint::AfterSends(k) = point {
                let slot = included.entry(k).or_default();
                slot.0 += counts[p] as usize;
                slot.1 += 1;
            }
        }
    }

    println!("{} scripts for n={n} f={f}, all passed", scripts.len());
    for (k, (yes, total)) in included {
        println!("failed after {k} sends: counted in {yes} of {total} results");
    }
    Ok(())
}
