//! The point-to-point contract protocol code is written against.
//!
//! Both the simulator and the socket transport implement [`Transport`].
//! Sends never report failure of the receiver. Receives either yield a
//! message or, once the failure monitor confirms the sender dead and no
//! matching message can still arrive, [`Received::SenderFailed`].

use crate::collectives::failinfo::FailureInfo;
use crate::error::Result;
use crate::types::{OpId, Phase, ProcessId};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Payload<V> {
    pub value: V,
    pub failinfo: FailureInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<V> {
    pub op: OpId,
    pub from: ProcessId,
    pub to: ProcessId,
    pub phase: Phase,
    pub payload: Payload<V>,
}

impl<V> Envelope<V> {
    pub fn matches(&self, from: ProcessId, op: OpId, phase: Phase) -> bool {
        self.from == from && self.op == op && self.phase == phase
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Received<V> {
    Message(Envelope<V>),
    SenderFailed,
}

/// Local lifecycle markers written to the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Milestone {
    Init,
    Deliver,
}

#[allow(async_fn_in_trait)]
pub trait Transport<V: Value> {
    fn rank(&self) -> ProcessId;

    fn size(&self) -> usize;

    /// Fire-and-forget. A process that fail-stops at this send never
    /// resumes: the returned future stays pending.
    async fn send(&self, env: Envelope<V>);

    async fn recv_from(&self, from: ProcessId, op: OpId, phase: Phase) -> Received<V>;

    /// First message from any candidate in any of `phases`, or a candidate
    /// confirmed failed with nothing queued or in flight from it.
    /// Errors with `AllFailed` when `candidates` is empty.
    async fn recv_any(
        &self,
        candidates: &[ProcessId],
        op: OpId,
        phases: &[Phase],
    ) -> Result<(ProcessId, Received<V>)>;

    fn record(&self, milestone: Milestone, op: OpId, note: String);
}

pub(crate) fn payload_note<V: Value>(payload: &Payload<V>) -> String {
    format!("value={} fi={}", payload.value, payload.failinfo)
}
