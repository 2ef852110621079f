//! Failure information carried up the tree next to the reduction value.
//!
//! Three encodings of decreasing size: the full list of failed ids, the
//! list's length plus a "failure in this subtree" bit, or only that bit.
//! The bit is set solely by tree-phase detections; up-correction
//! detections only grow the list or the count.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::ProcessId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    List,
    Count,
    Bit,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::List, Scheme::Count, Scheme::Bit];

    pub fn code(self) -> u8 {
        match self {
            Scheme::List => 0,
            Scheme::Count => 1,
            Scheme::Bit => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Scheme> {
        Scheme::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::List => "list",
            Scheme::Count => "count",
            Scheme::Bit => "bit",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown failure-information scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureInfo {
    List(BTreeSet<ProcessId>),
    Count { failed: u32, subtree_failed: bool },
    Bit(bool),
}

impl FailureInfo {
    pub fn empty(scheme: Scheme) -> Self {
        match scheme {
            Scheme::List => FailureInfo::List(BTreeSet::new()),
            Scheme::Count => FailureInfo::Count { failed: 0, subtree_failed: false },
            Scheme::Bit => FailureInfo::Bit(false),
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            FailureInfo::List(_) => Scheme::List,
            FailureInfo::Count { .. } => Scheme::Count,
            FailureInfo::Bit(_) => Scheme::Bit,
        }
    }

    /// An up-correction partner never sent its input.
    pub fn record_partner_failure(&mut self, p: ProcessId) {
        match self {
            FailureInfo::List(ids) => {
                ids.insert(p);
            }
            FailureInfo::Count { failed, .. } => *failed += 1,
            FailureInfo::Bit(_) => {}
        }
    }

    /// A tree child never sent its partial result.
    pub fn record_child_failure(&mut self, c: ProcessId) {
        match self {
            FailureInfo::List(ids) => {
                ids.insert(c);
            }
            FailureInfo::Count { failed, subtree_failed } => {
                *failed += 1;
                *subtree_failed = true;
            }
            FailureInfo::Bit(bit) => *bit = true,
        }
    }

    /// Whether this report, received from the subtree whose members satisfy
    /// `in_subtree`, admits a failure inside that subtree. The list scheme
    /// has no bit and answers from the ids it carries.
    pub fn indicates_subtree_failure(&self, in_subtree: impl Fn(ProcessId) -> bool) -> bool {
        match self {
            FailureInfo::List(ids) => ids.iter().any(|&p| in_subtree(p)),
            FailureInfo::Count { subtree_failed, .. } => *subtree_failed,
            FailureInfo::Bit(bit) => *bit,
        }
    }

    /// Number of failures this report knows about, if the scheme tracks it.
    pub fn failed_count(&self) -> Option<usize> {
        match self {
            FailureInfo::List(ids) => Some(ids.len()),
            FailureInfo::Count { failed, .. } => Some(*failed as usize),
            FailureInfo::Bit(_) => None,
        }
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        match self {
            FailureInfo::List(ids) => {
                out.extend_from_slice(&(ids.len() as u32).to_be_bytes());
                for &id in ids {
                    out.extend_from_slice(&(id as u32).to_be_bytes());
                }
            }
            FailureInfo::Count { failed, subtree_failed } => {
                out.extend_from_slice(&failed.to_be_bytes());
                out.push(*subtree_failed as u8);
            }
            FailureInfo::Bit(bit) => out.push(*bit as u8),
        }
    }

    pub fn decode(scheme: Scheme, bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::MalformedFrame(format!("failure info: {what}"));
        let read_u32 = |b: &[u8]| -> Result<u32> {
            Ok(u32::from_be_bytes(b.try_into().map_err(|_| bad("truncated"))?))
        };
        let read_bit = |b: u8| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(bad("bit out of range")),
        };
        match scheme {
            Scheme::List => {
                let len = read_u32(bytes.get(..4).ok_or_else(|| bad("truncated"))?)? as usize;
                let body = &bytes[4..];
                if body.len() != len * 4 {
                    return Err(bad("list length mismatch"));
                }
                let ids: BTreeSet<_> = body
                    .chunks_exact(4)
                    .map(|c| read_u32(c).map(|v| v as ProcessId))
                    .collect::<Result<_>>()?;
                if ids.len() != len {
                    return Err(bad("duplicate id in list"));
                }
                Ok(FailureInfo::List(ids))
            }
            Scheme::Count => {
                if bytes.len() != 5 {
                    return Err(bad("count needs 5 bytes"));
                }
                Ok(FailureInfo::Count {
                    failed: read_u32(&bytes[..4])?,
                    subtree_failed: read_bit(bytes[4])?,
                })
            }
            Scheme::Bit => match bytes {
                [b] => Ok(FailureInfo::Bit(read_bit(*b)?)),
                _ => Err(bad("bit needs 1 byte")),
            },
        }
    }
}

/// Combines a child's report into the accumulator. List inputs come from
/// disjoint process sets, so the union never loses an element.
pub fn merge_failure_info(acc: &FailureInfo, incoming: &FailureInfo) -> Result<FailureInfo> {
    match (acc, incoming) {
        (FailureInfo::List(a), FailureInfo::List(b)) => Ok(FailureInfo::List(a.union(b).copied().collect())),
        (
            FailureInfo::Count { failed: fa, subtree_failed: ba },
            FailureInfo::Count { failed: fb, subtree_failed: bb },
        ) => Ok(FailureInfo::Count { failed: fa + fb, subtree_failed: *ba || *bb }),
        (FailureInfo::Bit(a), FailureInfo::Bit(b)) => Ok(FailureInfo::Bit(*a || *b)),
        _ => Err(Error::SchemeMismatch),
    }
}

impl fmt::Display for FailureInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureInfo::List(ids) => {
                f.write_str("list{")?;
                for (i, id) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{id}")?;
                }
                f.write_str("}")
            }
            FailureInfo::Count { failed, subtree_failed } => {
                write!(f, "count({failed},{})", *subtree_failed as u8)
            }
            FailureInfo::Bit(bit) => write!(f, "bit({})", *bit as u8),
        }
    }
}

impl FromStr for FailureInfo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad failure info `{s}`"));
        let bit = |t: &str| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad()),
        };
        if let Some(body) = s.strip_prefix("list{").and_then(|r| r.strip_suffix('}')) {
            let ids = body
                .split(',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<ProcessId>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            return Ok(FailureInfo::List(ids));
        }
        if let Some(body) = s.strip_prefix("count(").and_then(|r| r.strip_suffix(')')) {
            let (n, b) = body.split_once(',').ok_or_else(bad)?;
            return Ok(FailureInfo::Count {
                failed: n.parse().map_err(|_| bad())?,
                subtree_failed: bit(b)?,
            });
        }
        if let Some(body) = s.strip_prefix("bit(").and_then(|r| r.strip_suffix(')')) {
            return Ok(FailureInfo::Bit(bit(body)?));
        }
        Err(bad())
    }
}
