//! Event traces and their line format.
//!
//! One event per line, fields in fixed order, the free-form note last:
//!
//! ```text
//! seq=4 time=3 kind=send actor=3 peer=4 op=1 phase=up_correction note=value=3 fi=list{}
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::{OpId, Phase, ProcessId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Send,
    Recv,
    Fail,
    Init,
    Deliver,
    ConfirmFailed,
}

impl EventKind {
    const ALL: [EventKind; 6] = [
        EventKind::Send,
        EventKind::Recv,
        EventKind::Fail,
        EventKind::Init,
        EventKind::Deliver,
        EventKind::ConfirmFailed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Send => "send",
            EventKind::Recv => "recv",
            EventKind::Fail => "fail",
            EventKind::Init => "init",
            EventKind::Deliver => "deliver",
            EventKind::ConfirmFailed => "confirm_failed",
        }
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::MalformedTrace(format!("unknown event kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub time: u64,
    pub kind: EventKind,
    pub actor: ProcessId,
    pub peer: Option<ProcessId>,
    pub op: Option<OpId>,
    pub phase: Option<Phase>,
    pub note: String,
}

impl TraceEvent {
    /// Value of `key=...` inside the note, if present.
    pub fn note_field(&self, key: &str) -> Option<&str> {
        self.note
            .split(' ')
            .find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
    }

    /// First word of the note: the collective an init/deliver belongs to.
    pub fn note_tag(&self) -> &str {
        self.note.split(' ').next().unwrap_or("")
    }
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seq={} time={} kind={} actor={} peer={} op={} phase={} note={}",
            self.seq,
            self.time,
            self.kind.as_str(),
            self.actor,
            opt(&self.peer),
            opt(&self.op),
            opt(&self.phase),
            self.note
        )
    }
}

impl FromStr for TraceEvent {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = |what: &str| Error::MalformedTrace(format!("{what} in `{line}`"));
        let mut rest = line;
        let mut field = |key: &str| -> Result<&str> {
            let tail = rest
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| bad(&format!("missing `{key}`")))?;
            let (value, next) = tail.split_once(' ').ok_or_else(|| bad("truncated line"))?;
            rest = next;
            Ok(value)
        };
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad("bad number"));
        let opt_num = |s: &str| -> Result<Option<u64>> {
            if s == "-" {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };

        let seq = num(field("seq")?)?;
        let time = num(field("time")?)?;
        let kind = field("kind")?.parse()?;
        let actor = num(field("actor")?)? as ProcessId;
        let peer = opt_num(field("peer")?)?.map(|p| p as ProcessId);
        let op = opt_num(field("op")?)?.map(OpId);
        let phase = match field("phase")? {
            "-" => None,
            p => Some(p.parse().map_err(|_| bad("bad phase"))?),
        };
        let note = rest.strip_prefix("note=").ok_or_else(|| bad("missing `note`"))?;
        Ok(TraceEvent { seq, time, kind, actor, peer, op, phase, note: note.to_string() })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(Trace { events })
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    /// Number of `send` events in `phase`.
    pub fn sends_in(&self, phase: Phase) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Send && e.phase == Some(phase))
            .count()
    }

    pub fn total_sends(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Send).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let e = TraceEvent {
            seq: 4,
            time: 3,
            kind: EventKind::Send,
            actor: 3,
            peer: Some(4),
            op: Some(OpId(1)),
            phase: Some(Phase::UpCorrection),
            note: "value=3 fi=list{}".into(),
        };
        let line = e.to_string();
        assert_eq!(
            line,
            "seq=4 time=3 kind=send actor=3 peer=4 op=1 phase=up_correction note=value=3 fi=list{}"
        );
        let back: TraceEvent = line.parse().unwrap();
        assert_eq!(back, e);
        assert_eq!(back.note_field("value"), Some("3"));
        assert_eq!(back.note_field("fi"), Some("list{}"));
    }

    #[test]
    fn empty_fields_round_trip() {
        let e = TraceEvent {
            seq: 0,
            time: 0,
            kind: EventKind::Fail,
            actor: 1,
            peer: None,
            op: None,
            phase: None,
            note: String::new(),
        };
        assert_eq!(e.to_string().parse::<TraceEvent>().unwrap(), e);
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!("seq=x".parse::<TraceEvent>(), Err(Error::MalformedTrace(_))));
        assert!(Trace::parse("seq=0 time=0 kind=nope actor=0 peer=- op=- phase=- note=").is_err());
    }
}
