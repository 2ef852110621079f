//! Wire format.
//!
//! ```text
//! u32 length | u8 version | u8 kind | u64 op | u8 phase | u32 from | u32 to
//! | u8 scheme | u32 len, failinfo | u32 len, value
//! ```
//!
//! All integers are big-endian. `length` counts every byte after itself.

use std::io::{self, Read};

use crate::collectives::{FailureInfo, Scheme};
use crate::error::{Error, Result};
use crate::transport::{Envelope, Payload};
use crate::types::{OpId, Phase, ProcessId};
use crate::value::Value;

pub const VERSION: u8 = 1;

/// Frames larger than this are rejected before allocating.
pub const MAX_FRAME: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Data = 1,
    Probe = 2,
    ProbeAck = 3,
}

impl FrameKind {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(FrameKind::Data),
            2 => Ok(FrameKind::Probe),
            3 => Ok(FrameKind::ProbeAck),
            _ => Err(Error::MalformedFrame(format!("unknown frame kind {code}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub op: OpId,
    pub phase: Phase,
    pub from: u32,
    pub to: u32,
    pub scheme: Scheme,
    pub failinfo: Vec<u8>,
    pub value: Vec<u8>,
}

impl Frame {
    /// A liveness probe, or its answer. Only `kind`, `from` and `to` mean
    /// anything.
    pub fn control(kind: FrameKind, from: ProcessId, to: ProcessId) -> Self {
        Frame {
            kind,
            op: OpId(0),
            phase: Phase::UpCorrection,
            from: from as u32,
            to: to as u32,
            scheme: Scheme::List,
            failinfo: Vec::new(),
            value: Vec::new(),
        }
    }

    pub fn data<V: Value>(env: &Envelope<V>) -> Self {
        let mut failinfo = Vec::new();
        env.payload.failinfo.encode(&mut failinfo);
        let mut value = Vec::new();
        env.payload.value.encode(&mut value);
        Frame {
            kind: FrameKind::Data,
            op: env.op,
            phase: env.phase,
            from: env.from as u32,
            to: env.to as u32,
            scheme: env.payload.failinfo.scheme(),
            failinfo,
            value,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let body = 1 + 1 + 8 + 1 + 4 + 4 + 1 + 4 + self.failinfo.len() + 4 + self.value.len();
        let mut out = Vec::with_capacity(4 + body);
        out.extend_from_slice(&(body as u32).to_be_bytes());
        out.push(VERSION);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.op.0.to_be_bytes());
        out.push(self.phase.code());
        out.extend_from_slice(&self.from.to_be_bytes());
        out.extend_from_slice(&self.to.to_be_bytes());
        out.push(self.scheme.code());
        out.extend_from_slice(&(self.failinfo.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.failinfo);
        out.extend_from_slice(&(self.value.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.value);
        out
    }

    /// Decodes one complete frame, length prefix included.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let length = r.u32()? as usize;
        if length != bytes.len() - 4 {
            return Err(Error::MalformedFrame(format!("length {length} but {} bytes follow", bytes.len() - 4)));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::VersionMismatch(version));
        }
        let kind = FrameKind::from_code(r.u8()?)?;
        let op = OpId(r.u64()?);
        let phase_code = r.u8()?;
        let phase = Phase::from_code(phase_code).ok_or_else(|| Error::MalformedFrame(format!("unknown phase {phase_code}")))?;
        let from = r.u32()?;
        let to = r.u32()?;
        let scheme_code = r.u8()?;
        let scheme = Scheme::from_code(scheme_code).ok_or_else(|| Error::MalformedFrame(format!("unknown scheme {scheme_code}")))?;
        let failinfo = r.chunk()?.to_vec();
        let value = r.chunk()?.to_vec();
        if r.pos != bytes.len() {
            return Err(Error::MalformedFrame("trailing bytes".into()));
        }
        Ok(Frame { kind, op, phase, from, to, scheme, failinfo, value })
    }

    pub fn into_envelope<V: Value>(self) -> Result<Envelope<V>> {
        if self.kind != FrameKind::Data {
            return Err(Error::MalformedFrame("not a data frame".into()));
        }
        Ok(Envelope {
            op: self.op,
            from: self.from as ProcessId,
            to: self.to as ProcessId,
            phase: self.phase,
            payload: Payload {
                value: V::decode(&self.value)?,
                failinfo: FailureInfo::decode(self.scheme, &self.failinfo)?,
            },
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::MalformedFrame("truncated frame".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn chunk(&mut self) -> Result<&'a [u8]> {
        let len = self.u32()? as usize;
        self.take(len)
    }
}

pub fn encode_frame<V: Value>(env: &Envelope<V>) -> Vec<u8> {
    Frame::data(env).encode()
}

pub fn decode_frame<V: Value>(bytes: &[u8]) -> Result<Envelope<V>> {
    Frame::decode(bytes)?.into_envelope()
}

/// Reads one frame (prefix included) from a stream. `Ok(None)` on a clean
/// end of stream between frames.
pub fn read_frame(stream: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut prefix = [0u8; 4];
    match stream.read_exact(&mut prefix) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut buf = vec![0u8; 4 + len];
    buf[..4].copy_from_slice(&prefix);
    stream.read_exact(&mut buf[4..])?;
    Ok(Some(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Multiset;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn env(value: u64, failinfo: FailureInfo) -> Envelope<u64> {
        Envelope { op: OpId(42), from: 3, to: 4, phase: Phase::Tree, payload: Payload { value, failinfo } }
    }

    #[test]
    fn data_frame_round_trip() {
        let e = env(7, FailureInfo::empty(Scheme::Bit));
        let bytes = encode_frame(&e);
        assert_eq!(decode_frame::<u64>(&bytes).unwrap(), e);
        assert_eq!(encode_frame(&decode_frame::<u64>(&bytes).unwrap()), bytes);
    }

    #[test]
    fn list_failinfo_is_count_then_sorted_ids() {
        let e = env(0, FailureInfo::List(BTreeSet::from([5, 1])));
        let frame = Frame::data(&e);
        assert_eq!(frame.failinfo, [0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 5]);
    }

    #[test]
    fn rejects_truncation_and_versions() {
        let bytes = encode_frame(&env(7, FailureInfo::empty(Scheme::Count)));
        for cut in 0..bytes.len() {
            assert!(decode_frame::<u64>(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_frame::<u64>(&bad), Err(Error::VersionMismatch(9))));
        let mut bad = bytes;
        bad[5] = 7;
        assert!(matches!(decode_frame::<u64>(&bad), Err(Error::MalformedFrame(_))));
    }

    #[test]
    fn stream_reader_splits_frames() {
        let a = encode_frame(&env(1, FailureInfo::empty(Scheme::List)));
        let b = Frame::control(FrameKind::Probe, 1, 2).encode();
        let joined = [a.clone(), b.clone()].concat();
        let mut cur = std::io::Cursor::new(joined);
        assert_eq!(read_frame(&mut cur).unwrap(), Some(a));
        assert_eq!(read_frame(&mut cur).unwrap(), Some(b));
        assert_eq!(read_frame(&mut cur).unwrap(), None);
    }

    proptest! {
        #[test]
        fn list_sets_round_trip(ids in proptest::collection::btree_set(0usize..1000, 0..20), v in any::<u64>(), op in any::<u64>()) {
            let e = Envelope { op: OpId(op), from: 1, to: 2, phase: Phase::UpCorrection, payload: Payload { value: v, failinfo: FailureInfo::List(ids) } };
            prop_assert_eq!(decode_frame::<u64>(&encode_frame(&e)).unwrap(), e);
        }

        #[test]
        fn multiset_frames_round_trip(counts in proptest::collection::vec(0u32..4, 0..70), bit in any::<bool>()) {
            let e = Envelope { op: OpId(9), from: 0, to: 5, phase: Phase::BroadcastCorrection, payload: Payload { value: Multiset(counts), failinfo: FailureInfo::Bit(bit) } };
            prop_assert_eq!(decode_frame::<Multiset>(&encode_frame(&e)).unwrap(), e);
        }
    }
}
