//! The worked example over loopback sockets, one thread per process. The
//! dead process never binds its port, so its peers get refused
//! connections and give up on it once the probe budget runs out.
//!
//! ```text
//! cargo run --example tcp_localhost
//! ```

use std::time::Instant;

use ftcoll::cli::{judge, run_tcp_threads};
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::{Inputs, Scenario, TransportKind};
use ftcoll::trace::EventKind;

fn main() -> ftcoll::Result<()> {
    let s = Scenario {
        inputs: Inputs::Ids,
        transport: TransportKind::Tcp,
        probe_timeout_ms: 150,
        probe_retries: 2,
        script: FailureScript::new().with(1, FailurePoint::Preoperational),
        ..Scenario::new(7, 1)
    };
    let start = Instant::now();
    let exec = run_tcp_threads(&s)?;
    println!("finished in {:?}", start.elapsed());

    for e in exec.trace.iter().filter(|e| e.kind == EventKind::ConfirmFailed) {
        println!("process {} confirmed {} failed at {} us", e.actor, e.peer.unwrap_or(0), e.time);
    }
    for (p, r) in exec.results.iter().enumerate() {
        println!("process {p}: {r}");
    }
    print!("{}", judge(&s, &exec.trace)?.render());
    Ok(())
}
