//! Driving the simulator and the reduce entry point directly, with a
//! caller-supplied combining function instead of a scenario.
//!
//! ```text
//! cargo run --example custom_reduction
//! ```

use ftcoll::collectives::{reduce, Config, ReduceMsg};
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::simnet::{SimConfig, Simulation};
use ftcoll::transport::Transport;
use ftcoll::value::Custom;
use ftcoll::OpId;

fn gcd(a: &u64, b: &u64) -> u64 {
    let (mut a, mut b) = (*a, *b);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn main() -> ftcoll::Result<()> {
    let (n, f) = (12, 2);
    let inputs: Vec<u64> = (0..n as u64).map(|p| 360 * (p + 1)).collect();
    let script = FailureScript::new()
        .with(4, FailurePoint::Preoperational)
        .with(9, FailurePoint::AfterSends(0));

    let sim = Simulation::new(n, script, SimConfig { seed: 3, ..SimConfig::default() });
    let run = sim.run(|net| {
        let data = inputs[net.rank()];
        async move {
            let cfg = Config::new(n, f, Custom(gcd));
            reduce(&net, data, 0, &ReduceMsg::new(OpId(7), n), &cfg).await
        }
    })?;

    match run.outcomes[0].finished() {
        Some(Ok(Some(v))) => println!("gcd at the root: {v}"),
        other => println!("root ended with {other:?}"),
    }
    println!("{} messages", run.trace.total_sends());
    Ok(())
}
