use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Rank of a participant, `0 <= id < n`.
pub type ProcessId = usize;

/// Identifier of one collective invocation.
///
/// Composite operations (allreduce) derive sub-operation ids for their
/// reduce and broadcast rounds with [`OpId::derive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpId(pub u64);

impl OpId {
    pub fn derive(self, tag: u64) -> OpId {
        OpId(self.0.wrapping_shl(16) | ((tag + 1) & 0xffff))
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which part of a protocol an envelope belongs to. Receives match on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    UpCorrection,
    Tree,
    BroadcastTree,
    BroadcastCorrection,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::UpCorrection,
        Phase::Tree,
        Phase::BroadcastTree,
        Phase::BroadcastCorrection,
    ];

    pub fn code(self) -> u8 {
        match self {
            Phase::UpCorrection => 0,
            Phase::Tree => 1,
            Phase::BroadcastTree => 2,
            Phase::BroadcastCorrection => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Phase> {
        Phase::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::UpCorrection => "up_correction",
            Phase::Tree => "tree",
            Phase::BroadcastTree => "broadcast_tree",
            Phase::BroadcastCorrection => "broadcast_correction",
        }
    }

    pub fn is_reduce(self) -> bool {
        matches!(self, Phase::UpCorrection | Phase::Tree)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown phase `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_codes_round_trip() {
        for p in Phase::ALL {
            assert_eq!(Phase::from_code(p.code()), Some(p));
            assert_eq!(p.as_str().parse::<Phase>().unwrap(), p);
        }
        assert_eq!(Phase::from_code(4), None);
    }

    #[test]
    fn derived_op_ids_are_distinct() {
        let base = OpId(7);
        let ids: std::collections::BTreeSet<_> = (0..100).map(|t| base.derive(t)).collect();
        assert_eq!(ids.len(), 100);
        assert!(!ids.contains(&base));
    }
}
