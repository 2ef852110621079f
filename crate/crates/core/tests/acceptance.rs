//! Acceptance run: one line per criterion, nonzero exit if any is red.
//!
//! Every limit the criteria rely on is a constant below.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use ftcoll::cli::{random_scenario, run_and_check, run_sim, run_tcp_processes, sweep, ProcessResult, SweepParams};
use ftcoll::failmodel::{FailurePoint, FailureScript};
use ftcoll::oracle::{
    decode_inclusion, expected_upcorrection_messages, Collective, Inputs, Scenario, TransportKind,
};
use ftcoll::tcpnet::probe_liveness;
use ftcoll::trace::{EventKind, Trace};
use ftcoll::{Phase, ProcessId};

const WORKED_EXAMPLE_LIMIT: Duration = Duration::from_secs(1);
const COUNT_GRID_N: std::ops::RangeInclusive<usize> = 2..=64;
const COUNT_GRID_F: std::ops::RangeInclusive<usize> = 0..=8;
const COUNT_GRID_LIMIT: Duration = Duration::from_secs(30);
const EXHAUSTIVE_MAX_N: usize = 12;
const EXHAUSTIVE_MAX_F: usize = 2;
const EXHAUSTIVE_LIMIT: Duration = Duration::from_secs(600);
const RANDOM_MIN_SCENARIOS: usize = 10_000;
const RANDOM_MAX_N: usize = 32;
const RANDOM_MAX_F: usize = 4;
const RANDOM_TRIALS_PER_CELL: usize = 63;
const TCP_PROBE_TIMEOUT_MS: u64 = 100;
const TCP_PROBE_RETRIES: u32 = 3;
const TCP_CONFIRM_FACTOR: u32 = 2;
const TCP_RANDOM_SCENARIOS: usize = 8;
const TCP_RUN_LIMIT: Duration = Duration::from_secs(60);
const DETERMINISM_SCENARIOS: usize = 200;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn worked_example() -> Scenario {
    Scenario {
        inputs: Inputs::Ids,
        script: FailureScript::new().with(1, FailurePoint::Preoperational),
        ..Scenario::new(7, 1)
    }
}

/// Tree-phase sends carrying `value` from any of `actors`.
fn tree_sends_with(trace: &Trace, value: &str, actors: &[ProcessId]) -> usize {
    trace
        .iter()
        .filter(|e| e.kind == EventKind::Send && e.phase == Some(Phase::Tree) && actors.contains(&e.actor))
        .filter(|e| e.note_field("value") == Some(value))
        .count()
}

fn check_worked_example(trace: &Trace, root_value: Option<&str>) -> Result<(), String> {
    ensure(root_value == Some("20"), || format!("root result {root_value:?}, expected 20"))?;
    ensure(tree_sends_with(trace, "7", &[3, 4]) > 0, || "no tree send of 7 from 3 or 4".into())?;
    ensure(tree_sends_with(trace, "11", &[5, 6]) > 0, || "no tree send of 11 from 5 or 6".into())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let s = worked_example();
    let (exec, verdict) = run_and_check(&s).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(verdict.pass(), || verdict.render())?;
    check_worked_example(&exec.trace, exec.value(0))?;
    ensure(took < WORKED_EXAMPLE_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("root 20, accumulators 7 (3,4) and 11 (5,6) in tree sends, {took:?} < {WORKED_EXAMPLE_LIMIT:?}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut cells = 0;
    for n in COUNT_GRID_N {
        for f in COUNT_GRID_F {
            let exec = run_sim(&Scenario::new(n, f)).map_err(|e| e.to_string())?;
            let (upc, tree) = (exec.trace.sends_in(Phase::UpCorrection), exec.trace.sends_in(Phase::Tree));
            let want = expected_upcorrection_messages(n, f);
            ensure(upc == want && tree == n - 1, || {
                format!("n={n} f={f}: up-correction {upc} (want {want}), tree {tree} (want {})", n - 1)
            })?;
            cells += 1;
        }
    }
    let took = start.elapsed();
    ensure(took < COUNT_GRID_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{cells} (n, f) cells exact, {took:?} < {COUNT_GRID_LIMIT:?}"))
}

/// Every script with at most `tolerance()` victims, each victim failing
/// preoperationally or after any number of its failure-free sends.
fn all_scripts(n: usize, f: usize) -> Result<Vec<FailureScript>, String> {
    let probe = Scenario::new(n, f);
    let exec = run_sim(&probe).map_err(|e| e.to_string())?;
    let sends: Vec<usize> =
        (0..n).map(|p| exec.trace.iter().filter(|e| e.kind == EventKind::Send && e.actor == p).count()).collect();
    let points = |p: ProcessId| {
        std::iter::once(FailurePoint::Preoperational).chain((0..=sends[p]).map(FailurePoint::AfterSends))
    };

    let mut scripts = vec![FailureScript::new()];
    let mut frontier = vec![(FailureScript::new(), 0)];
    for _ in 0..probe.tolerance() {
        let mut next = Vec::new();
        for (script, from) in &frontier {
            for p in *from..n {
                for point in points(p) {
                    let grown = script.clone().with(p, point);
                    scripts.push(grown.clone());
                    next.push((grown, p + 1));
                }
            }
        }
        frontier = next;
    }
    Ok(scripts)
}

struct Exhaustive {
    runs: usize,
    live_root_runs: usize,
}

fn exhaustive() -> Result<Exhaustive, String> {
    let mut tally = Exhaustive { runs: 0, live_root_runs: 0 };
    for n in 1..=EXHAUSTIVE_MAX_N {
        for f in 0..=EXHAUSTIVE_MAX_F {
            for script in all_scripts(n, f)? {
                for inputs in [Inputs::Probe, Inputs::Multiset] {
                    let s = Scenario { inputs, script: script.clone(), ..Scenario::new(n, f) };
                    let (exec, verdict) = run_and_check(&s).map_err(|e| e.to_string())?;
                    let label = || format!("n={n} f={f} {:?} {:?}", s.inputs, script);
                    ensure(verdict.pass(), || format!("{}\n{}", label(), verdict.render()))?;
                    tally.runs += 1;
                    if script.get(s.root).is_some() {
                        continue;
                    }
                    tally.live_root_runs += 1;
                    if let ProcessResult::Error(e) = &exec.results[s.root] {
                        return Err(format!("{}: root raised `{e}`", label()));
                    }
                    let value = exec.value(s.root).ok_or_else(|| format!("{}: live root delivered nothing", label()))?;
                    let counts = decode_inclusion(&s, value).ok_or_else(|| format!("{}: undecodable {value}", label()))?;
                    for p in 0..n {
                        let ok = match script.get(p) {
                            None => counts[p] == 1,
                            Some(FailurePoint::Preoperational) => counts[p] == 0,
                            Some(FailurePoint::AfterSends(_)) => counts[p] <= 1,
                        };
                        ensure(ok, || format!("{}: process {p} counted {} times", label(), counts[p]))?;
                    }
                }
            }
        }
    }
    Ok(tally)
}

fn criterion_3(result: &Result<Exhaustive, String>, took: Duration) -> Outcome {
    let tally = result.as_ref().map_err(Clone::clone)?;
    ensure(took < EXHAUSTIVE_LIMIT, || format!("took {took:?}"))?;
    Ok(format!(
        "{} runs (n <= {EXHAUSTIVE_MAX_N}, f <= {EXHAUSTIVE_MAX_F}, bit-set and multiset probes), zero violations, {took:?} < {EXHAUSTIVE_LIMIT:?}",
        tally.runs
    ))
}

fn criterion_4(result: &Result<Exhaustive, String>) -> Outcome {
    let tally = result.as_ref().map_err(|e| format!("enumeration failed: {e}"))?;
    let mut controls = 0;
    for (n, f, victims) in [(7, 1, vec![1, 2]), (3, 1, vec![1, 2]), (10, 2, vec![1, 2, 3])] {
        let script = victims.iter().fold(FailureScript::new(), |s, &p| s.with(p, FailurePoint::Preoperational));
        let exec = run_sim(&Scenario { script, ..Scenario::new(n, f) }).map_err(|e| e.to_string())?;
        let raised = matches!(&exec.results[0], ProcessResult::Error(e) if e.contains("failure-free"));
        ensure(raised, || format!("n={n} f={f} victims {victims:?}: root gave {}", exec.results[0]))?;
        controls += 1;
    }
    Ok(format!(
        "never raised in {} live-root runs; raised in all {controls} (f+1)-failure controls",
        tally.live_root_runs
    ))
}

fn criterion_5() -> Outcome {
    let params = SweepParams {
        n_range: 1..=RANDOM_MAX_N,
        f_range: 0..=RANDOM_MAX_F,
        trials: RANDOM_TRIALS_PER_CELL,
        seed: 0,
        collectives: vec![Collective::Reduce, Collective::Allreduce],
        all_schemes: true,
    };
    let summary = sweep(&params).map_err(|e| e.to_string())?;
    ensure(summary.total() >= RANDOM_MIN_SCENARIOS, || format!("only {} scenarios", summary.total()))?;
    if let Some(r) = summary.failures().next() {
        return Err(format!("n={} f={} trial {}: {}", r.n, r.f, r.trial, r.evidence.join("; ")));
    }
    let reduces = summary.records.iter().filter(|r| r.collective == "reduce").count();
    Ok(format!(
        "{} scenarios ({reduces} reduce, {} allreduce) x 3 schemes, zero violations, schemes agree on every message",
        summary.total(),
        summary.total() - reduces
    ))
}

fn reduce_rounds(trace: &Trace) -> usize {
    trace
        .iter()
        .filter(|e| e.kind == EventKind::Send && matches!(e.phase, Some(Phase::UpCorrection | Phase::Tree)))
        .filter_map(|e| e.op)
        .collect::<BTreeSet<_>>()
        .len()
}

fn criterion_6() -> Outcome {
    let mut cases = 0;
    for f in 1..=4 {
        for n in [f + 3, 2 * f + 5, 16, 31] {
            let free = Scenario { collective: Collective::Allreduce, ..Scenario::new(n, f) };
            let (base, _) = run_and_check(&free).map_err(|e| e.to_string())?;
            let bound = (f + 1) * base.trace.total_sends();

            let s = Scenario { script: FailureScript::new().with(0, FailurePoint::Preoperational), ..free };
            let (exec, verdict) = run_and_check(&s).map_err(|e| e.to_string())?;
            let label = format!("n={n} f={f}");
            ensure(verdict.pass(), || format!("{label}\n{}", verdict.render()))?;
            let rounds = reduce_rounds(&exec.trace);
            ensure(rounds == 2, || format!("{label}: {rounds} reduce phases"))?;
            let values: BTreeSet<Option<&str>> = (1..n).map(|p| exec.value(p)).collect();
            ensure(values.len() == 1 && !values.contains(&None), || format!("{label}: values {values:?}"))?;
            let total = exec.trace.total_sends();
            ensure(total <= bound, || format!("{label}: {total} messages > {bound}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} cases: 2 reduce phases, one value, messages within (f+1) x failure-free"))
}

fn tcp(s: Scenario) -> Scenario {
    Scenario {
        transport: TransportKind::Tcp,
        probe_timeout_ms: TCP_PROBE_TIMEOUT_MS,
        probe_retries: TCP_PROBE_RETRIES,
        ..s
    }
}

fn criterion_7() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_ftcoll").as_ref();
    let budget = Duration::from_millis(TCP_PROBE_TIMEOUT_MS) * TCP_PROBE_RETRIES;
    let limit = budget * TCP_CONFIRM_FACTOR;

    let s = tcp(worked_example());
    let exec = run_tcp_processes(&s, exe, TCP_RUN_LIMIT).map_err(|e| e.to_string())?;
    let verdict = ftcoll::cli::judge(&s, &exec.trace).map_err(|e| e.to_string())?;
    ensure(verdict.pass(), || format!("worked example over tcp\n{}", verdict.render()))?;
    check_worked_example(&exec.trace, exec.value(0))?;
    let confirms: Vec<u64> = exec
        .trace
        .iter()
        .filter(|e| e.kind == EventKind::ConfirmFailed && e.peer == Some(1))
        .map(|e| e.time)
        .collect();
    ensure(!confirms.is_empty(), || "killed process 1 was never confirmed failed".into())?;
    let slowest = Duration::from_micros(*confirms.iter().max().unwrap());
    ensure(slowest <= limit, || format!("confirmation after {slowest:?} > {limit:?}"))?;

    let dead = ftcoll::cli::tcprun::free_local_addrs(1).map_err(|e| e.to_string())?[0];
    let start = Instant::now();
    let answered = probe_liveness(0, 1, dead, Duration::from_millis(TCP_PROBE_TIMEOUT_MS), TCP_PROBE_RETRIES);
    let probe_took = start.elapsed();
    ensure(!answered && probe_took <= limit, || format!("dead probe answered={answered} after {probe_took:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..TCP_RANDOM_SCENARIOS {
        let n = 3 + i;
        let f = i % 3;
        let s = tcp(random_scenario(&mut rng, n, f, &[Collective::Reduce, Collective::Allreduce]));
        let exec = run_tcp_processes(&s, exe, TCP_RUN_LIMIT).map_err(|e| e.to_string())?;
        let verdict = ftcoll::cli::judge(&s, &exec.trace).map_err(|e| e.to_string())?;
        ensure(verdict.pass(), || format!("random tcp scenario {i}\n{}", verdict.render()))?;
    }
    Ok(format!(
        "worked example with killed process and {TCP_RANDOM_SCENARIOS} random scenarios pass over worker processes; \
         confirmed failed after {slowest:?}, probe gave up after {probe_took:?}, both <= {limit:?}"
    ))
}

fn digest(trace: &Trace) -> [u8; 32] {
    Sha256::digest(trace.render().as_bytes()).into()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..DETERMINISM_SCENARIOS {
        let n = 1 + i % RANDOM_MAX_N;
        let f = i % (RANDOM_MAX_F + 1);
        let s = random_scenario(&mut rng, n, f, &[Collective::Reduce, Collective::Allreduce]);
        let a = run_sim(&s).map_err(|e| e.to_string())?;
        let b = run_sim(&s).map_err(|e| e.to_string())?;
        ensure(digest(&a.trace) == digest(&b.trace), || format!("scenario {i} diverged (n={n} f={f})"))?;
    }
    Ok(format!("{DETERMINISM_SCENARIOS} scenarios, equal SHA-256 across two runs"))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "worked example", criterion_1()));
    results.push((2, "message counts", criterion_2()));
    let start = Instant::now();
    let enumeration = exhaustive();
    let took = start.elapsed();
    results.push((3, "exactly-once inclusion", criterion_3(&enumeration, took)));
    results.push((4, "pigeonhole", criterion_4(&enumeration)));
    results.push((5, "randomized semantics", criterion_5()));
    results.push((6, "root rotation", criterion_6()));
    results.push((7, "tcp conformance", criterion_7()));
    results.push((8, "determinism", criterion_8()));

    let mut red = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {id} {name}: pass ({detail})"),
            Err(why) => {
                red += 1;
                println!("criterion {id} {name}: FAIL ({why})");
            }
        }
    }
    if red == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
