use std::time::{Duration, Instant};

use ftcoll::cli::{judge, run_tcp_processes, run_tcp_threads};
use ftcoll::collectives::Scheme;
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::{Collective, Inputs, Scenario, TransportKind};
use ftcoll::tcpnet::{probe_liveness, Registry, TcpConfig, TcpNet};

fn tcp(n: usize, f: usize, script: FailureScript) -> Scenario {
    Scenario { script, transport: TransportKind::Tcp, probe_timeout_ms: 100, probe_retries: 3, ..Scenario::new(n, f) }
}

#[test]
fn worked_example_over_threads() {
    let s = Scenario { inputs: Inputs::Ids, ..tcp(7, 1, FailureScript::new().with(1, FailurePoint::Preoperational)) };
    let exec = run_tcp_threads(&s).unwrap();
    let verdict = judge(&s, &exec.trace).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    assert_eq!(exec.value(0), Some("20"));
}

#[test]
fn inoperational_failure_over_threads() {
    for scheme in Scheme::ALL {
        let s = Scenario { scheme, ..tcp(9, 2, FailureScript::new().with(4, FailurePoint::AfterSends(1)).with(7, FailurePoint::AfterSends(0))) };
        let exec = run_tcp_threads(&s).unwrap();
        let verdict = judge(&s, &exec.trace).unwrap();
        assert!(verdict.pass(), "{scheme}\n{}", verdict.render());
    }
}

#[test]
fn allreduce_rotation_over_threads() {
    let s = Scenario {
        collective: Collective::Allreduce,
        ..tcp(7, 1, FailureScript::new().with(0, FailurePoint::Preoperational))
    };
    let exec = run_tcp_threads(&s).unwrap();
    let verdict = judge(&s, &exec.trace).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    for p in 1..7 {
        assert_eq!(exec.value(p), Some("126"));
    }
}

#[test]
fn killed_worker_process() {
    let s = Scenario { inputs: Inputs::Ids, ..tcp(7, 1, FailureScript::new().with(1, FailurePoint::Preoperational)) };
    let exec = run_tcp_processes(&s, env!("CARGO_BIN_EXE_ftcoll").as_ref(), Duration::from_secs(60)).unwrap();
    let verdict = judge(&s, &exec.trace).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    assert_eq!(exec.value(0), Some("20"));
}

#[test]
fn probe_answers_for_live_peer_and_times_out_for_dead() {
    let addrs = ftcoll::cli::tcprun::free_local_addrs(3).unwrap();
    let registry = Registry::new(addrs.clone()).unwrap();
    let _live = TcpNet::<u64>::bind(registry, 1, TcpConfig::default()).unwrap();

    let start = Instant::now();
    assert!(probe_liveness(0, 1, addrs[1], Duration::from_millis(200), 3));
    assert!(start.elapsed() < Duration::from_millis(200));

    let start = Instant::now();
    assert!(!probe_liveness(0, 2, addrs[2], Duration::from_millis(200), 3));
    let took = start.elapsed();
    assert!(took >= Duration::from_millis(600) && took <= Duration::from_millis(1200), "{took:?}");
}
