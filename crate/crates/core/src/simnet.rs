//! Deterministic discrete-event simulator.
//!
//! Each process is a future written in blocking style against
//! [`Transport`]. The event loop owns virtual time and polls a process only
//! when something it may be waiting for changed: a message landed in its
//! mailbox, or some process fail-stopped. Latencies are drawn from a seeded
//! ChaCha stream, so a `(seed, scenario)` pair always produces the same
//! trace.
//!
//! The failure monitor is perfect: a receive on a dead sender returns
//! `SenderFailed` as soon as nothing matching is queued or in flight.

use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::failmodel::{fails_before_sending, FailureMonitor, FailureScript};
use crate::trace::{EventKind, Trace, TraceEvent};
use crate::transport::{payload_note, Envelope, Milestone, Received, Transport};
use crate::types::{OpId, Phase, ProcessId};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    /// Inclusive bounds of the uniform per-message latency.
    pub latency: (u64, u64),
    /// Processes start at a uniform time in `0..=start_skew`.
    pub start_skew: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 0, latency: (1, 10), start_skew: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<O> {
    Finished(O),
    Failed,
    /// Still waiting when the event queue ran dry.
    Blocked,
}

impl<O> Outcome<O> {
    pub fn finished(&self) -> Option<&O> {
        match self {
            Outcome::Finished(o) => Some(o),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimRun<O> {
    pub trace: Trace,
    pub outcomes: Vec<Outcome<O>>,
}

impl<O> SimRun<O> {
    pub fn blocked(&self) -> Vec<ProcessId> {
        self.outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o, Outcome::Blocked))
            .map(|(p, _)| p)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    n: usize,
    script: FailureScript,
    config: SimConfig,
}

impl Simulation {
    pub fn new(n: usize, script: FailureScript, config: SimConfig) -> Self {
        assert!(config.latency.0 <= config.latency.1, "empty latency range");
        Simulation { n, script, config }
    }

    /// Runs every process to completion, failure, or deadlock.
    pub fn run<V, O, F, Fut>(&self, entry: F) -> Result<SimRun<O>>
    where
        V: Value,
        F: FnMut(SimNet<V>) -> Fut,
        Fut: Future<Output = O> + 'static,
    {
        let run = self.run_to_quiescence(entry);
        let blocked = run.blocked();
        if blocked.is_empty() {
            Ok(run)
        } else {
            Err(Error::Deadlock { blocked })
        }
    }

    /// Like [`Simulation::run`] but hands back the run even when some
    /// processes are left blocked.
    pub fn run_to_quiescence<V, O, F, Fut>(&self, mut entry: F) -> SimRun<O>
    where
        V: Value,
        F: FnMut(SimNet<V>) -> Fut,
        Fut: Future<Output = O> + 'static,
    {
        let n = self.n;
        let core = Rc::new(RefCell::new(Core::new(n, self.script.clone(), self.config)));
        let mut tasks: Vec<Option<Pin<Box<dyn Future<Output = O>>>>> = (0..n).map(|_| None).collect();
        let mut outcomes: Vec<Option<Outcome<O>>> = (0..n).map(|_| None).collect();

        {
            let mut c = core.borrow_mut();
            for p in 0..n {
                if self.script.is_preoperational(p) {
                    c.fail(p, None, "pre".into());
                    outcomes[p] = Some(Outcome::Failed);
                } else {
                    let at = if self.config.start_skew > 0 {
                        c.rng.gen_range(0..=self.config.start_skew)
                    } else {
                        0
                    };
                    c.schedule(at, Pending::Start(p));
                }
            }
            c.newly_failed = false;
        }

        let mut cx = Context::from_waker(Waker::noop());
        let mut poll = |p: ProcessId,
                        tasks: &mut Vec<Option<Pin<Box<dyn Future<Output = O>>>>>,
                        outcomes: &mut Vec<Option<Outcome<O>>>| {
            let Some(task) = tasks[p].as_mut() else { return };
            match task.as_mut().poll(&mut cx) {
                Poll::Ready(o) => {
                    tasks[p] = None;
                    outcomes[p] = Some(Outcome::Finished(o));
                    core.borrow_mut().state[p] = ProcState::Finished;
                }
                Poll::Pending => {
                    if core.borrow().state[p] == ProcState::Failed {
                        tasks[p] = None;
                        outcomes[p] = Some(Outcome::Failed);
                    }
                }
            }
        };

        loop {
            let next = core.borrow_mut().pop();
            let Some(event) = next else { break };
            match event {
                Pending::Start(p) => {
                    core.borrow_mut().state[p] = ProcState::Running;
                    tasks[p] = Some(Box::pin(entry(SimNet { me: p, n, core: core.clone() })));
                    poll(p, &mut tasks, &mut outcomes);
                }
                Pending::Arrive(env) => {
                    let to = env.to;
                    let deliverable = core.borrow_mut().arrive(env);
                    if deliverable {
                        poll(to, &mut tasks, &mut outcomes);
                    }
                }
            }
            // A fail-stop may release receivers anywhere; re-poll until stable.
            while std::mem::take(&mut core.borrow_mut().newly_failed) {
                for p in 0..n {
                    if tasks[p].is_some() {
                        poll(p, &mut tasks, &mut outcomes);
                    }
                }
            }
        }

        let trace = std::mem::take(&mut core.borrow_mut().trace);
        let outcomes = outcomes
            .into_iter()
            .map(|o| o.unwrap_or(Outcome::Blocked))
            .collect();
        SimRun { trace: Trace { events: trace }, outcomes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ProcState {
    NotStarted,
    Running,
    Finished,
    Failed,
}

enum Pending<V> {
    Start(ProcessId),
    Arrive(Envelope<V>),
}

type ChannelKey = (ProcessId, ProcessId, OpId, Phase);

struct Core<V> {
    now: u64,
    rng: ChaCha8Rng,
    latency: (u64, u64),
    script: FailureScript,
    trace: Vec<TraceEvent>,
    state: Vec<ProcState>,
    sends: Vec<usize>,
    mailbox: Vec<VecDeque<Envelope<V>>>,
    in_flight: BTreeMap<ChannelKey, usize>,
    channel_clock: BTreeMap<(ProcessId, ProcessId), u64>,
    queue: BTreeMap<(u64, u64), Pending<V>>,
    queue_seq: u64,
    newly_failed: bool,
}

impl<V: Value> Core<V> {
    fn new(n: usize, script: FailureScript, config: SimConfig) -> Self {
        Core {
            now: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            latency: config.latency,
            script,
            trace: Vec::new(),
            state: vec![ProcState::NotStarted; n],
            sends: vec![0; n],
            mailbox: (0..n).map(|_| VecDeque::new()).collect(),
            in_flight: BTreeMap::new(),
            channel_clock: BTreeMap::new(),
            queue: BTreeMap::new(),
            queue_seq: 0,
            newly_failed: false,
        }
    }

    fn schedule(&mut self, at: u64, ev: Pending<V>) {
        self.queue.insert((at, self.queue_seq), ev);
        self.queue_seq += 1;
    }

    fn pop(&mut self) -> Option<Pending<V>> {
        let ((t, _), ev) = self.queue.pop_first()?;
        self.now = t;
        Some(ev)
    }

    #[allow(clippy::too_many_arguments)]
    fn event(
        &mut self,
        kind: EventKind,
        actor: ProcessId,
        peer: Option<ProcessId>,
        op: Option<OpId>,
        phase: Option<Phase>,
        note: String,
    ) {
        let seq = self.trace.len() as u64;
        self.trace.push(TraceEvent { seq, time: self.now, kind, actor, peer, op, phase, note });
    }

    fn fail(&mut self, p: ProcessId, op: Option<OpId>, note: String) {
        self.state[p] = ProcState::Failed;
        self.mailbox[p].clear();
        self.newly_failed = true;
        self.event(EventKind::Fail, p, None, op, None, note);
    }

    /// Returns false when the sender fail-stops instead of sending.
    fn try_send(&mut self, env: Envelope<V>) -> bool {
        let from = env.from;
        if fails_before_sending(&self.script, from, self.sends[from]) {
            let note = match self.script.get(from) {
                Some(point) => point.to_string(),
                None => String::new(),
            };
            self.fail(from, Some(env.op), note);
            return false;
        }
        self.sends[from] += 1;
        let lat = self.rng.gen_range(self.latency.0..=self.latency.1);
        let clock = self.channel_clock.entry((from, env.to)).or_insert(0);
        let at = (self.now + lat).max(*clock);
        *clock = at;
        *self.in_flight.entry((from, env.to, env.op, env.phase)).or_insert(0) += 1;
        let note = payload_note(&env.payload);
        self.event(EventKind::Send, from, Some(env.to), Some(env.op), Some(env.phase), note);
        self.schedule(at, Pending::Arrive(env));
        true
    }

    /// Returns true when the receiver should be polled.
    fn arrive(&mut self, env: Envelope<V>) -> bool {
        let key = (env.from, env.to, env.op, env.phase);
        if let Some(c) = self.in_flight.get_mut(&key) {
            *c -= 1;
            if *c == 0 {
                self.in_flight.remove(&key);
            }
        }
        let to = env.to;
        match self.state[to] {
            ProcState::Failed | ProcState::Finished => false,
            ProcState::NotStarted => {
                self.mailbox[to].push_back(env);
                false
            }
            ProcState::Running => {
                self.mailbox[to].push_back(env);
                true
            }
        }
    }

    fn in_flight_from(&self, from: ProcessId, to: ProcessId, op: OpId, phase: Phase) -> bool {
        self.in_flight.contains_key(&(from, to, op, phase))
    }

    fn take(&mut self, me: ProcessId, idx: usize) -> Envelope<V> {
        let env = self.mailbox[me].remove(idx).expect("index from position()");
        let note = payload_note(&env.payload);
        self.event(EventKind::Recv, me, Some(env.from), Some(env.op), Some(env.phase), note);
        env
    }

    fn confirm(&mut self, me: ProcessId, peer: ProcessId, op: OpId, phase: Option<Phase>) {
        self.event(EventKind::ConfirmFailed, me, Some(peer), Some(op), phase, String::new());
    }

    fn try_recv_from(&mut self, me: ProcessId, from: ProcessId, op: OpId, phase: Phase) -> Option<Received<V>> {
        if let Some(idx) = self.mailbox[me].iter().position(|e| e.matches(from, op, phase)) {
            return Some(Received::Message(self.take(me, idx)));
        }
        if self.state[from] == ProcState::Failed && !self.in_flight_from(from, me, op, phase) {
            self.confirm(me, from, op, Some(phase));
            return Some(Received::SenderFailed);
        }
        None
    }

    fn try_recv_any(
        &mut self,
        me: ProcessId,
        candidates: &[ProcessId],
        op: OpId,
        phases: &[Phase],
    ) -> Option<Result<(ProcessId, Received<V>)>> {
        if candidates.is_empty() {
            return Some(Err(Error::AllFailed));
        }
        if let Some(idx) = self.mailbox[me]
            .iter()
            .position(|e| e.op == op && candidates.contains(&e.from) && phases.contains(&e.phase))
        {
            let env = self.take(me, idx);
            return Some(Ok((env.from, Received::Message(env))));
        }
        for &c in candidates {
            if self.state[c] == ProcState::Failed
                && !phases.iter().any(|&ph| self.in_flight_from(c, me, op, ph))
            {
                let phase = (phases.len() == 1).then(|| phases[0]);
                self.confirm(me, c, op, phase);
                return Some(Ok((c, Received::SenderFailed)));
            }
        }
        None
    }
}

/// Per-process handle onto a running simulation.
pub struct SimNet<V> {
    me: ProcessId,
    n: usize,
    core: Rc<RefCell<Core<V>>>,
}

impl<V> Clone for SimNet<V> {
    fn clone(&self) -> Self {
        SimNet { me: self.me, n: self.n, core: self.core.clone() }
    }
}

impl<V: Value> FailureMonitor for SimNet<V> {
    fn confirm_failed(&self, p: ProcessId) -> bool {
        self.core.borrow().state[p] == ProcState::Failed
    }
}

impl<V: Value> SimNet<V> {
    /// Current virtual time.
    pub fn now(&self) -> u64 {
        self.core.borrow().now
    }
}

impl<V: Value> Transport<V> for SimNet<V> {
    fn rank(&self) -> ProcessId {
        self.me
    }

    fn size(&self) -> usize {
        self.n
    }

    async fn send(&self, env: Envelope<V>) {
        debug_assert_eq!(env.from, self.me);
        debug_assert!(env.to != self.me && env.to < self.n);
        let alive = self.core.borrow_mut().try_send(env);
        if !alive {
            std::future::pending::<()>().await;
        }
    }

    async fn recv_from(&self, from: ProcessId, op: OpId, phase: Phase) -> Received<V> {
        std::future::poll_fn(|_| match self.core.borrow_mut().try_recv_from(self.me, from, op, phase) {
            Some(r) => Poll::Ready(r),
            None => Poll::Pending,
        })
        .await
    }

    async fn recv_any(
        &self,
        candidates: &[ProcessId],
        op: OpId,
        phases: &[Phase],
    ) -> Result<(ProcessId, Received<V>)> {
        std::future::poll_fn(|_| {
            match self.core.borrow_mut().try_recv_any(self.me, candidates, op, phases) {
                Some(r) => Poll::Ready(r),
                None => Poll::Pending,
            }
        })
        .await
    }

    fn record(&self, milestone: Milestone, op: OpId, note: String) {
        let kind = match milestone {
            Milestone::Init => EventKind::Init,
            Milestone::Deliver => EventKind::Deliver,
        };
        self.core.borrow_mut().event(kind, self.me, None, Some(op), None, note);
    }
}
