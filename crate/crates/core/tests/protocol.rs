use ftcoll::cli::{run_and_check, run_sim, ProcessResult};
use ftcoll::collectives::Scheme;
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::{expected_upcorrection_messages, Collective, Inputs, Scenario};
use ftcoll::trace::EventKind;
use ftcoll::Phase;

fn reduce(n: usize, f: usize, script: FailureScript) -> Scenario {
    Scenario { script, ..Scenario::new(n, f) }
}

fn allreduce(n: usize, f: usize, script: FailureScript) -> Scenario {
    Scenario { collective: Collective::Allreduce, ..reduce(n, f, script) }
}

#[test]
fn worked_example_sums_to_twenty() {
    let s = Scenario {
        inputs: Inputs::Ids,
        ..reduce(7, 1, FailureScript::new().with(1, FailurePoint::Preoperational))
    };
    let (exec, verdict) = run_and_check(&s).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    assert_eq!(exec.value(0), Some("20"));

    // Up-correction accumulators of the pair {3, 4}.
    let recv_value = |actor, peer| {
        exec.trace
            .iter()
            .find(|e| e.kind == EventKind::Recv && e.actor == actor && e.peer == Some(peer))
            .and_then(|e| e.note_field("value").map(str::to_string))
    };
    assert_eq!(recv_value(3, 4).as_deref(), Some("4"));
    assert_eq!(recv_value(4, 3).as_deref(), Some("3"));
}

#[test]
fn failure_free_reduce_counts() {
    let s = Scenario { inputs: Inputs::Ids, ..reduce(7, 1, FailureScript::new()) };
    let (exec, verdict) = run_and_check(&s).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    assert_eq!(exec.value(0), Some("21"));
    assert_eq!(exec.trace.total_sends(), 12);
    assert_eq!(exec.trace.sends_in(Phase::UpCorrection), 6);
}

#[test]
fn single_process_reduce() {
    let s = Scenario { inputs: Inputs::Values(vec![9]), ..reduce(1, 0, FailureScript::new()) };
    let (exec, verdict) = run_and_check(&s).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    assert_eq!(exec.value(0), Some("9"));
    assert_eq!(exec.trace.total_sends(), 0);
}

#[test]
fn nonzero_root_is_renumbered() {
    let s = Scenario { root: 4, ..reduce(7, 1, FailureScript::new().with(2, FailurePoint::Preoperational)) };
    let (exec, verdict) = run_and_check(&s).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    assert_eq!(exec.value(4), Some(&*(127 - 4).to_string()));
}

#[test]
fn both_root_children_failed() {
    let script = FailureScript::new()
        .with(1, FailurePoint::Preoperational)
        .with(2, FailurePoint::Preoperational);
    let exec = run_sim(&reduce(3, 1, script)).unwrap();
    assert!(matches!(&exec.results[0], ProcessResult::Error(e) if e.contains("failure-free")), "{:?}", exec.results);
}

#[test]
fn counts_match_formula_for_several_sizes() {
    for (n, f) in [(8, 2), (13, 3), (2, 0), (5, 4), (33, 2)] {
        let (exec, verdict) = run_and_check(&reduce(n, f, FailureScript::new())).unwrap();
        assert!(verdict.pass(), "n={n} f={f}\n{}", verdict.render());
        assert_eq!(exec.trace.sends_in(Phase::UpCorrection), expected_upcorrection_messages(n, f));
        assert_eq!(exec.trace.sends_in(Phase::Tree), n - 1);
    }
}

#[test]
fn every_scheme_passes_inoperational_failures() {
    for scheme in Scheme::ALL {
        for s in 0..4 {
            let sc = Scenario {
                scheme,
                ..reduce(9, 2, FailureScript::new().with(3, FailurePoint::AfterSends(s)).with(5, FailurePoint::AfterSends(1)))
            };
            let (_, verdict) = run_and_check(&sc).unwrap();
            assert!(verdict.pass(), "{scheme} s={s}\n{}", verdict.render());
        }
    }
}

#[test]
fn allreduce_failure_free_agrees() {
    let (exec, verdict) = run_and_check(&allreduce(7, 1, FailureScript::new())).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    for p in 0..7 {
        assert_eq!(exec.value(p), Some("127"));
    }
}

#[test]
fn allreduce_rotates_past_dead_root() {
    let s = allreduce(7, 1, FailureScript::new().with(0, FailurePoint::Preoperational));
    let (exec, verdict) = run_and_check(&s).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
    for p in 1..7 {
        assert_eq!(exec.value(p), Some("126"));
    }
    let reduce_ops: std::collections::BTreeSet<_> = exec
        .trace
        .iter()
        .filter(|e| e.kind == EventKind::Init && e.note_tag() == "reduce")
        .map(|e| e.op)
        .collect();
    assert_eq!(reduce_ops.len(), 2);
}

#[test]
fn allreduce_with_multiset_probe() {
    let s = Scenario {
        inputs: Inputs::Multiset,
        ..allreduce(10, 2, FailureScript::new().with(1, FailurePoint::Preoperational).with(6, FailurePoint::AfterSends(2)))
    };
    let (_, verdict) = run_and_check(&s).unwrap();
    assert!(verdict.pass(), "{}", verdict.render());
}
