//! Scenario runs over localhost TCP, either as threads of this process or
//! as one `ftcoll worker` process per rank.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use crate::cli::harness::{input_multiset, input_u64, participate, Execution, ProcessResult};
use crate::cli::scenario_file::render_scenario;
use crate::error::{Error, Result};
use crate::failmodel::FailurePoint;
use crate::oracle::Scenario;
use crate::tcpnet::{block_on, unix_micros, Registry, TcpConfig, TcpNet};
use crate::trace::{EventKind, Trace, TraceEvent};
use crate::types::ProcessId;
use crate::value::{ReduceOp, Reduction, Value};

/// `n` currently free loopback addresses.
pub fn free_local_addrs(n: usize) -> Result<Vec<SocketAddr>> {
    let listeners = (0..n).map(|_| TcpListener::bind("127.0.0.1:0")).collect::<std::io::Result<Vec<_>>>()?;
    listeners.iter().map(|l| l.local_addr().map_err(Error::from)).collect()
}

/// Interleaves per-process traces by time and renumbers them.
pub fn merge_traces(parts: impl IntoIterator<Item = Trace>) -> Trace {
    let mut events: Vec<TraceEvent> = parts.into_iter().flat_map(|t| t.events).collect();
    events.sort_by_key(|e| (e.time, e.actor, e.seq));
    for (i, e) in events.iter_mut().enumerate() {
        e.seq = i as u64;
    }
    Trace { events }
}

fn pre_failure(p: ProcessId) -> TraceEvent {
    TraceEvent { seq: 0, time: 0, kind: EventKind::Fail, actor: p, peer: None, op: None, phase: None, note: "pre".into() }
}

pub fn tcp_config(s: &Scenario, p: ProcessId) -> TcpConfig {
    TcpConfig {
        probe_timeout: Duration::from_millis(s.probe_timeout_ms),
        probe_retries: s.probe_retries,
        fail_after_sends: match s.script.get(p) {
            Some(FailurePoint::AfterSends(k)) => Some(k),
            _ => None,
        },
    }
}

/// Runs one rank to completion on an already bound endpoint. `None` when
/// the rank fail-stopped.
pub fn drive<V>(net: &TcpNet<V>, s: &Scenario, data: V) -> Option<ProcessResult>
where
    V: Value,
    ReduceOp: Reduction<V>,
{
    block_on(net, participate(net, s, data))
}

fn threads_with<V>(s: &Scenario, input: fn(&Scenario, ProcessId) -> V) -> Result<Execution>
where
    V: Value + Send,
    ReduceOp: Reduction<V>,
{
    let registry = Registry::new(free_local_addrs(s.n)?)?;
    let running: Vec<ProcessId> = (0..s.n).filter(|&p| !s.script.is_preoperational(p)).collect();
    let barrier = Arc::new(Barrier::new(running.len()));
    let epoch = unix_micros();
    // Live ranks keep answering probes until every rank is done.
    let finished = Arc::new(Barrier::new(running.len()));

    let handles: Vec<_> = running
        .iter()
        .map(|&p| {
            let (registry, barrier, finished, s) = (registry.clone(), barrier.clone(), finished.clone(), s.clone());
            thread::spawn(move || -> Result<(ProcessId, ProcessResult, Trace)> {
                let net = TcpNet::<V>::bind(registry, p, tcp_config(&s, p));
                barrier.wait();
                let net = net?;
                net.set_epoch(epoch);
                let result = drive(&net, &s, input(&s, p)).unwrap_or(ProcessResult::Failed);
                let trace = net.trace();
                finished.wait();
                Ok((p, result, trace))
            })
        })
        .collect();

    let mut results = vec![ProcessResult::Failed; s.n];
    let mut parts: Vec<Trace> = Vec::new();
    for h in handles {
        let (p, r, t) = h.join().map_err(|_| Error::invalid("worker thread panicked"))??;
        results[p] = r;
        parts.push(t);
    }
    let pre: Vec<TraceEvent> = (0..s.n).filter(|&p| s.script.is_preoperational(p)).map(pre_failure).collect();
    parts.push(Trace { events: pre });
    Ok(Execution { trace: merge_traces(parts), results })
}

/// Runs every live rank as a thread with its own sockets. Preoperational
/// failures never bind, so peers see refused connections.
pub fn run_tcp_threads(s: &Scenario) -> Result<Execution> {
    s.validate()?;
    if s.uses_multiset() {
        threads_with(s, input_multiset)
    } else {
        threads_with(s, input_u64)
    }
}

/// Lines a worker prints on stdout.
const READY: &str = "ready";
const EVENT: &str = "event ";
const DONE: &str = "done ";

/// Body of `ftcoll worker`: bind, report ready, wait for `go <epoch>`, run,
/// stream the trace, then keep answering probes until stdin closes.
pub fn worker_main(s: &Scenario, registry: Registry, me: ProcessId, fail_after_sends: Option<usize>) -> Result<()> {
    if s.uses_multiset() {
        worker_with(s, registry, me, fail_after_sends, input_multiset)
    } else {
        worker_with(s, registry, me, fail_after_sends, input_u64)
    }
}

fn worker_with<V>(
    s: &Scenario,
    registry: Registry,
    me: ProcessId,
    fail_after_sends: Option<usize>,
    input: fn(&Scenario, ProcessId) -> V,
) -> Result<()>
where
    V: Value + Send,
    ReduceOp: Reduction<V>,
{
    let mut config = tcp_config(s, me);
    if fail_after_sends.is_some() {
        config.fail_after_sends = fail_after_sends;
    }
    let net = TcpNet::<V>::bind(registry, me, config)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{READY}")?;
    out.flush()?;

    let mut stdin = std::io::stdin().lock();
    let mut line = String::new();
    stdin.read_line(&mut line)?;
    let epoch = line
        .trim()
        .strip_prefix("go ")
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::invalid(format!("expected `go <epoch>`, got `{}`", line.trim())))?;
    net.set_epoch(epoch);

    let result = drive(&net, s, input(s, me));
    for e in net.trace().iter() {
        writeln!(out, "{EVENT}{e}")?;
    }
    writeln!(out, "{DONE}{}", result.clone().unwrap_or(ProcessResult::Failed))?;
    out.flush()?;
    if result.is_none() {
        return Ok(());
    }
    // Linger so peers still waiting can probe us.
    let mut rest = String::new();
    while stdin.read_line(&mut rest)? > 0 {
        rest.clear();
    }
    Ok(())
}

fn parse_result(text: &str) -> ProcessResult {
    if let Some(v) = text.strip_prefix("value ") {
        ProcessResult::Value(v.to_string())
    } else if let Some(e) = text.strip_prefix("error ") {
        ProcessResult::Error(e.to_string())
    } else {
        match text {
            "contributed" => ProcessResult::Contributed,
            "failed" => ProcessResult::Failed,
            _ => ProcessResult::Blocked,
        }
    }
}

enum Line {
    Text(ProcessId, String),
    Closed(ProcessId),
}

struct Workers {
    children: Vec<Option<Child>>,
    stdins: BTreeMap<ProcessId, ChildStdin>,
}

impl Drop for Workers {
    fn drop(&mut self) {
        self.stdins.clear();
        for child in self.children.iter_mut().flatten() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Runs one `worker` process per rank from the `exe` binary. Preoperational
/// victims are killed once every worker is listening, before the start.
pub fn run_tcp_processes(s: &Scenario, exe: &Path, timeout: Duration) -> Result<Execution> {
    s.validate()?;
    let dir = std::env::temp_dir().join(format!("ftcoll-{}-{}", std::process::id(), unix_micros()));
    std::fs::create_dir_all(&dir)?;
    let registry = Registry::new(free_local_addrs(s.n)?)?;
    let deployment = dir.join("deployment");
    let scenario = dir.join("scenario");
    std::fs::write(&deployment, registry.render())?;
    std::fs::write(&scenario, render_scenario(s))?;
    let outcome = launch(s, exe, &deployment, &scenario, timeout);
    let _ = std::fs::remove_dir_all(&dir);
    outcome
}

fn launch(s: &Scenario, exe: &Path, deployment: &Path, scenario: &Path, timeout: Duration) -> Result<Execution> {
    let (tx, rx) = mpsc::channel();
    let mut workers = Workers { children: Vec::new(), stdins: BTreeMap::new() };
    for p in 0..s.n {
        let mut cmd = Command::new(exe);
        cmd.arg("worker")
            .arg("--deployment")
            .arg(deployment)
            .arg("--pid")
            .arg(p.to_string())
            .arg("--scenario")
            .arg(scenario)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        if let Some(FailurePoint::AfterSends(k)) = s.script.get(p) {
            cmd.arg("--fail-after-sends").arg(k.to_string());
        }
        let mut child = cmd.spawn()?;
        let stdout = child.stdout.take().expect("piped");
        workers.stdins.insert(p, child.stdin.take().expect("piped"));
        workers.children.push(Some(child));
        let tx = tx.clone();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(Line::Text(p, line)).is_err() {
                    return;
                }
            }
            let _ = tx.send(Line::Closed(p));
        });
    }
    drop(tx);

    let deadline = Instant::now() + timeout;
    let next = |rx: &mpsc::Receiver<Line>| -> Result<Line> {
        let left = deadline.saturating_duration_since(Instant::now());
        rx.recv_timeout(left).map_err(|_| Error::Deadlock { blocked: Vec::new() })
    };

    let mut ready = 0;
    while ready < s.n {
        match next(&rx)? {
            Line::Text(_, l) if l == READY => ready += 1,
            Line::Text(p, l) => return Err(Error::invalid(format!("worker {p} said `{l}` before ready"))),
            Line::Closed(p) => return Err(Error::invalid(format!("worker {p} exited before ready"))),
        }
    }

    let mut results = vec![ProcessResult::Blocked; s.n];
    let mut events = Vec::new();
    let mut pending: Vec<ProcessId> = Vec::new();
    for p in 0..s.n {
        if s.script.is_preoperational(p) {
            if let Some(mut child) = workers.children[p].take() {
                child.kill()?;
                child.wait()?;
            }
            workers.stdins.remove(&p);
            results[p] = ProcessResult::Failed;
            events.push(pre_failure(p));
        } else {
            pending.push(p);
        }
    }
    let epoch = unix_micros();
    for stdin in workers.stdins.values_mut() {
        writeln!(stdin, "go {epoch}")?;
        stdin.flush()?;
    }

    while !pending.is_empty() {
        let line = match next(&rx) {
            Ok(line) => line,
            Err(_) => return Err(Error::Deadlock { blocked: pending }),
        };
        match line {
            Line::Text(p, l) => {
                if let Some(e) = l.strip_prefix(EVENT) {
                    events.push(e.parse()?);
                } else if let Some(r) = l.strip_prefix(DONE) {
                    results[p] = parse_result(r);
                    pending.retain(|&q| q != p);
                }
            }
            Line::Closed(p) => pending.retain(|&q| q != p),
        }
    }
    drop(workers);
    Ok(Execution { trace: merge_traces([Trace { events }]), results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_orders_by_time_then_actor() {
        let e = |time, actor, seq| TraceEvent {
            seq,
            time,
            kind: EventKind::Init,
            actor,
            peer: None,
            op: None,
            phase: None,
            note: String::new(),
        };
        let t = merge_traces([Trace { events: vec![e(5, 1, 0), e(9, 1, 1)] }, Trace { events: vec![e(5, 0, 0)] }]);
        let order: Vec<_> = t.iter().map(|e| (e.time, e.actor, e.seq)).collect();
        assert_eq!(order, [(5, 0, 0), (5, 1, 1), (9, 1, 2)]);
    }

    #[test]
    fn results_parse_back() {
        for r in [
            ProcessResult::Value("20".into()),
            ProcessResult::Contributed,
            ProcessResult::Failed,
            ProcessResult::Error("no failure-free subtree".into()),
        ] {
            assert_eq!(parse_result(&r.to_string()), r);
        }
    }
}
