//! [`Transport`] over TCP with a probing failure detector.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeSet, HashMap};
use std::future::Future;
use std::io::Write;
use std::marker::PhantomData;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::pin::pin;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::task::{Context, Poll, Waker};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::failmodel::{FailureMonitor, FailurePoint};
use crate::tcpnet::frame::{read_frame, Frame, FrameKind};
use crate::tcpnet::registry::Registry;
use crate::trace::{EventKind, Trace, TraceEvent};
use crate::transport::{payload_note, Envelope, Milestone, Received, Transport};
use crate::types::{OpId, Phase, ProcessId};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcpConfig {
    /// Per-attempt probe timeout, also the idle time after which a waiting
    /// receive starts probing.
    pub probe_timeout: Duration,
    pub probe_retries: u32,
    /// Fail-stop instead of making send number `s + 1`.
    pub fail_after_sends: Option<usize>,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig { probe_timeout: Duration::from_millis(500), probe_retries: 3, fail_after_sends: None }
    }
}

impl TcpConfig {
    /// Longest a probe of a dead peer can take.
    pub fn budget(&self) -> Duration {
        self.probe_timeout * self.probe_retries.max(1)
    }
}

/// Microseconds since the Unix epoch.
pub fn unix_micros() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_micros() as u64)
}

/// Asks `peer` at `addr` whether it is alive: up to `retries` attempts, each
/// given `timeout` to connect, send a probe and read the answer. A failed
/// attempt waits out the rest of its slot, so a dead peer costs
/// `timeout * retries`.
pub fn probe_liveness(me: ProcessId, peer: ProcessId, addr: SocketAddr, timeout: Duration, retries: u32) -> bool {
    for _ in 0..retries.max(1) {
        let start = Instant::now();
        if probe_once(me, peer, addr, timeout).unwrap_or(false) {
            return true;
        }
        if let Some(rest) = timeout.checked_sub(start.elapsed()) {
            thread::sleep(rest);
        }
    }
    false
}

fn probe_once(me: ProcessId, peer: ProcessId, addr: SocketAddr, timeout: Duration) -> std::io::Result<bool> {
    let start = Instant::now();
    let mut stream = TcpStream::connect_timeout(&addr, timeout)?;
    let left = timeout.saturating_sub(start.elapsed()).max(Duration::from_millis(1));
    stream.set_read_timeout(Some(left))?;
    stream.set_nodelay(true)?;
    stream.write_all(&Frame::control(FrameKind::Probe, me, peer).encode())?;
    let Some(bytes) = read_frame(&mut stream)? else { return Ok(false) };
    Ok(matches!(Frame::decode(&bytes), Ok(f) if f.kind == FrameKind::ProbeAck && f.from as usize == peer))
}

struct Inbox<V> {
    msgs: Vec<Envelope<V>>,
    /// Data connections per sender that have not reached end of stream.
    open: HashMap<ProcessId, usize>,
    /// Senders whose connection closed since they were last probed.
    suspects: BTreeSet<ProcessId>,
}

struct Shared<V> {
    inbox: Mutex<Inbox<V>>,
    arrived: Condvar,
    halted: AtomicBool,
    me: ProcessId,
}

impl<V> Shared<V> {
    fn lock(&self) -> MutexGuard<'_, Inbox<V>> {
        self.inbox.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// One process's endpoint. Protocol code runs on a single thread; socket
/// reads happen on background threads that feed a shared inbox.
pub struct TcpNet<V> {
    me: ProcessId,
    registry: Registry,
    config: TcpConfig,
    shared: Arc<Shared<V>>,
    outgoing: RefCell<HashMap<ProcessId, TcpStream>>,
    failed: RefCell<BTreeSet<ProcessId>>,
    sends: Cell<usize>,
    epoch: Cell<u64>,
    last_time: Cell<u64>,
    events: RefCell<Vec<TraceEvent>>,
    _value: PhantomData<V>,
}

impl<V: Value + Send> TcpNet<V> {
    /// Binds this process's listener and starts answering probes and
    /// accepting data.
    pub fn bind(registry: Registry, me: ProcessId, config: TcpConfig) -> Result<Self> {
        if me >= registry.len() {
            return Err(Error::invalid(format!("pid {me} not in deployment of {}", registry.len())));
        }
        let listener = TcpListener::bind(registry.addr(me))?;
        listener.set_nonblocking(true)?;
        let shared = Arc::new(Shared {
            inbox: Mutex::new(Inbox { msgs: Vec::new(), open: HashMap::new(), suspects: BTreeSet::new() }),
            arrived: Condvar::new(),
            halted: AtomicBool::new(false),
            me,
        });
        let accept_shared = Arc::clone(&shared);
        thread::spawn(move || accept_loop(listener, accept_shared));
        Ok(TcpNet {
            me,
            registry,
            config,
            shared,
            outgoing: RefCell::new(HashMap::new()),
            failed: RefCell::new(BTreeSet::new()),
            sends: Cell::new(0),
            epoch: Cell::new(unix_micros()),
            last_time: Cell::new(0),
            events: RefCell::new(Vec::new()),
            _value: PhantomData,
        })
    }
}

impl<V> TcpNet<V> {
    /// Trace times count microseconds from `epoch_us` (Unix time).
    pub fn set_epoch(&self, epoch_us: u64) {
        self.epoch.set(epoch_us);
    }

    pub fn halted(&self) -> bool {
        self.shared.halted.load(Ordering::SeqCst)
    }

    pub fn config(&self) -> &TcpConfig {
        &self.config
    }

    /// Events recorded so far, in local order.
    pub fn trace(&self) -> Trace {
        Trace { events: self.events.borrow().clone() }
    }

    /// Whether `peer` answers probes. A negative answer is final.
    pub fn probe(&self, peer: ProcessId) -> bool {
        if self.failed.borrow().contains(&peer) {
            return false;
        }
        let live = probe_liveness(self.me, peer, self.registry.addr(peer), self.config.probe_timeout, self.config.probe_retries);
        if !live {
            self.failed.borrow_mut().insert(peer);
        }
        live
    }

    fn event(&self, kind: EventKind, peer: Option<ProcessId>, op: Option<OpId>, phase: Option<Phase>, note: String) {
        let time = unix_micros().saturating_sub(self.epoch.get()).max(self.last_time.get());
        self.last_time.set(time);
        let mut events = self.events.borrow_mut();
        let seq = events.len() as u64;
        events.push(TraceEvent { seq, time, kind, actor: self.me, peer, op, phase, note });
    }

    /// Fail-stop: stop answering probes, refuse connections, and close every
    /// outgoing stream after what was already written.
    fn halt(&self) {
        self.shared.halted.store(true, Ordering::SeqCst);
        for (_, s) in self.outgoing.borrow_mut().drain() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }

    fn write_to(&self, to: ProcessId, bytes: &[u8]) {
        let mut outgoing = self.outgoing.borrow_mut();
        if !outgoing.contains_key(&to) {
            match TcpStream::connect_timeout(&self.registry.addr(to), self.config.probe_timeout) {
                Ok(s) => {
                    let _ = s.set_nodelay(true);
                    outgoing.insert(to, s);
                }
                // The receiver is gone; the message is lost, as it would be
                // with a crashed process.
                Err(_) => return,
            }
        }
        let stream = outgoing.get_mut(&to).expect("inserted above");
        if stream.write_all(bytes).is_err() {
            outgoing.remove(&to);
        }
    }

    /// Blocks until a matching message arrives or a candidate is confirmed
    /// dead with none of its connections still delivering.
    fn wait(&self, candidates: &[ProcessId], op: OpId, phases: &[Phase]) -> Result<(ProcessId, Received<V>)>
    where
        V: Value,
    {
        if candidates.is_empty() {
            return Err(Error::AllFailed);
        }
        let mut idle_since = Instant::now();
        loop {
            let mut inbox = self.shared.lock();
            let hit = inbox
                .msgs
                .iter()
                .position(|e| e.op == op && candidates.contains(&e.from) && phases.contains(&e.phase));
            if let Some(idx) = hit {
                let env = inbox.msgs.remove(idx);
                drop(inbox);
                self.event(EventKind::Recv, Some(env.from), Some(env.op), Some(env.phase), payload_note(&env.payload));
                return Ok((env.from, Received::Message(env)));
            }
            let dead = candidates
                .iter()
                .copied()
                .find(|c| self.failed.borrow().contains(c) && inbox.open.get(c).copied().unwrap_or(0) == 0);
            if let Some(c) = dead {
                drop(inbox);
                let phase = (phases.len() == 1).then(|| phases[0]);
                self.event(EventKind::ConfirmFailed, Some(c), Some(op), phase, String::new());
                return Ok((c, Received::SenderFailed));
            }

            let failed = self.failed.borrow().clone();
            let mut suspects: Vec<ProcessId> = candidates
                .iter()
                .copied()
                .filter(|c| inbox.suspects.contains(c) && !failed.contains(c))
                .collect();
            if suspects.is_empty() {
                let idle = idle_since.elapsed();
                if idle < self.config.probe_timeout {
                    let _ = self.shared.arrived.wait_timeout(inbox, self.config.probe_timeout - idle);
                    continue;
                }
                suspects = candidates.iter().copied().filter(|c| !failed.contains(c)).collect();
            }
            for c in &suspects {
                inbox.suspects.remove(c);
            }
            drop(inbox);
            for c in suspects {
                self.probe(c);
            }
            idle_since = Instant::now();
        }
    }
}

fn accept_loop<V: Value + Send>(listener: TcpListener, shared: Arc<Shared<V>>) {
    while !shared.halted.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let _ = stream.set_nonblocking(false);
                let s = Arc::clone(&shared);
                thread::spawn(move || read_loop(stream, s));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(2)),
            Err(_) => thread::sleep(Duration::from_millis(2)),
        }
    }
}

fn read_loop<V: Value + Send>(mut stream: TcpStream, shared: Arc<Shared<V>>) {
    let mut sender = None;
    while let Ok(Some(bytes)) = read_frame(&mut stream) {
        if shared.halted.load(Ordering::SeqCst) {
            break;
        }
        let Ok(frame) = Frame::decode(&bytes) else { break };
        match frame.kind {
            FrameKind::Data => {
                let Ok(env) = frame.into_envelope::<V>() else { break };
                let mut inbox = shared.lock();
                if sender.is_none() {
                    sender = Some(env.from);
                    *inbox.open.entry(env.from).or_insert(0) += 1;
                }
                inbox.msgs.push(env);
                drop(inbox);
                shared.arrived.notify_all();
            }
            FrameKind::Probe => {
                let ack = Frame::control(FrameKind::ProbeAck, shared.me, frame.from as ProcessId);
                if stream.write_all(&ack.encode()).is_err() {
                    break;
                }
            }
            FrameKind::ProbeAck => {}
        }
    }
    if let Some(p) = sender {
        let mut inbox = shared.lock();
        if let Some(c) = inbox.open.get_mut(&p) {
            *c -= 1;
        }
        inbox.suspects.insert(p);
        drop(inbox);
        shared.arrived.notify_all();
    }
}

impl<V: Value> FailureMonitor for TcpNet<V> {
    fn confirm_failed(&self, p: ProcessId) -> bool {
        !self.probe(p)
    }
}

impl<V: Value> Transport<V> for TcpNet<V> {
    fn rank(&self) -> ProcessId {
        self.me
    }

    fn size(&self) -> usize {
        self.registry.len()
    }

    async fn send(&self, env: Envelope<V>) {
        if self.halted() {
            std::future::pending::<()>().await;
        }
        if self.config.fail_after_sends == Some(self.sends.get()) {
            let point = FailurePoint::AfterSends(self.sends.get());
            self.event(EventKind::Fail, None, Some(env.op), None, point.to_string());
            self.halt();
            std::future::pending::<()>().await;
        }
        self.sends.set(self.sends.get() + 1);
        self.write_to(env.to, &Frame::data(&env).encode());
        self.event(EventKind::Send, Some(env.to), Some(env.op), Some(env.phase), payload_note(&env.payload));
    }

    async fn recv_from(&self, from: ProcessId, op: OpId, phase: Phase) -> Received<V> {
        self.wait(&[from], op, &[phase]).expect("one candidate").1
    }

    async fn recv_any(&self, candidates: &[ProcessId], op: OpId, phases: &[Phase]) -> Result<(ProcessId, Received<V>)> {
        self.wait(candidates, op, phases)
    }

    fn record(&self, milestone: Milestone, op: OpId, note: String) {
        let kind = match milestone {
            Milestone::Init => EventKind::Init,
            Milestone::Deliver => EventKind::Deliver,
        };
        self.event(kind, None, Some(op), None, note);
    }
}

/// Drives a protocol future on the current thread. Every transport call
/// completes synchronously except a fail-stopped send, so a pending poll
/// means the process is halted: that yields `None`.
pub fn block_on<V, F: Future>(net: &TcpNet<V>, fut: F) -> Option<F::Output> {
    let mut fut = pin!(fut);
    let mut cx = Context::from_waker(Waker::noop());
    loop {
        match fut.as_mut().poll(&mut cx) {
            Poll::Ready(out) => return Some(out),
            Poll::Pending if net.halted() => return None,
            Poll::Pending => thread::yield_now(),
        }
    }
}
