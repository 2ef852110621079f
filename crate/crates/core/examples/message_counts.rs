//! Failure-free message counts against the closed forms.
//!
//! ```text
//! cargo run --example message_counts -- 40 4
//! ```

use ftcoll::cli::run_sim;
use ftcoll::oracle::{expected_tree_messages, expected_upcorrection_messages, max_broadcast_messages, Collective, Scenario};
use ftcoll::Phase;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|a| a.parse().ok()).unwrap_or(default)
}

fn main() -> ftcoll::Result<()> {
    let (max_n, max_f) = (arg(1, 24), arg(2, 3));
    println!("{:>4} {:>3} {:>10} {:>10} {:>6} {:>10} {:>10}", "n", "f", "upc", "upc-form", "tree", "bcast", "bcast-max");
    for f in 0..=max_f {
        for n in (2..=max_n).step_by(f + 1) {
            let reduce = run_sim(&Scenario::new(n, f))?;
            let all = run_sim(&Scenario { collective: Collective::Allreduce, ..Scenario::new(n, f) })?;
            let bcast = all.trace.sends_in(Phase::BroadcastTree) + all.trace.sends_in(Phase::BroadcastCorrection);
            println!(
                "{:>4} {:>3} {:>10} {:>10} {:>6} {:>10} {:>10}",
                n,
                f,
                reduce.trace.sends_in(Phase::UpCorrection),
                expected_upcorrection_messages(n, f),
                reduce.trace.sends_in(Phase::Tree),
                bcast,
                max_broadcast_messages(n, f)
            );
            assert_eq!(reduce.trace.sends_in(Phase::Tree), expected_tree_messages(n));
        }
    }
    Ok(())
}
