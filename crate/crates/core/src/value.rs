//! Reduction values and the functions that combine them.
//!
//! Protocol code never looks inside a value. It only needs to combine two of
//! them, print them into the trace, and put them on the wire.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub trait Value: Clone + fmt::Debug + fmt::Display + PartialEq + 'static {
    fn encode(&self, out: &mut Vec<u8>);
    fn decode(bytes: &[u8]) -> Result<Self>;
}

impl Value for u64 {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_be_bytes());
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let raw: [u8; 8] = bytes
            .try_into()
            .map_err(|_| Error::MalformedFrame(format!("u64 value needs 8 bytes, got {}", bytes.len())))?;
        Ok(u64::from_be_bytes(raw))
    }
}

/// Per-process multiplicity vector: `counts[p]` is how often the input of
/// process `p` is contained in the value. Used as an exact inclusion probe
/// when `n` exceeds the width of an integer bit set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Multiset(pub Vec<u32>);

impl Multiset {
    /// The probe input of process `p` among `n`.
    pub fn unit(p: usize, n: usize) -> Self {
        let mut counts = vec![0; n];
        counts[p] = 1;
        Multiset(counts)
    }
}

impl fmt::Display for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("m[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

impl Value for Multiset {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.0.len() as u32).to_be_bytes());
        for c in &self.0 {
            out.extend_from_slice(&c.to_be_bytes());
        }
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::MalformedFrame("truncated multiset value".into());
        let len = u32::from_be_bytes(bytes.get(..4).ok_or_else(bad)?.try_into().unwrap()) as usize;
        let body = &bytes[4..];
        if body.len() != len * 4 {
            return Err(bad());
        }
        Ok(Multiset(
            body.chunks_exact(4)
                .map(|c| u32::from_be_bytes(c.try_into().unwrap()))
                .collect(),
        ))
    }
}

/// An associative, commutative combining function.
pub trait Reduction<V> {
    fn combine(&self, a: &V, b: &V) -> V;
}

/// Built-in reduction functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Max,
    Bor,
}

impl ReduceOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ReduceOp::Sum => "sum",
            ReduceOp::Max => "max",
            ReduceOp::Bor => "bor",
        }
    }
}

impl fmt::Display for ReduceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReduceOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(ReduceOp::Sum),
            "max" => Ok(ReduceOp::Max),
            "bor" => Ok(ReduceOp::Bor),
            other => Err(Error::invalid(format!("unknown reduction `{other}`"))),
        }
    }
}

impl Reduction<u64> for ReduceOp {
    fn combine(&self, a: &u64, b: &u64) -> u64 {
        match self {
            ReduceOp::Sum => a.wrapping_add(*b),
            ReduceOp::Max => *a.max(b),
            ReduceOp::Bor => a | b,
        }
    }
}

impl Reduction<Multiset> for ReduceOp {
    fn combine(&self, a: &Multiset, b: &Multiset) -> Multiset {
        let len = a.0.len().max(b.0.len());
        let at = |v: &Multiset, i: usize| v.0.get(i).copied().unwrap_or(0);
        Multiset(
            (0..len)
                .map(|i| {
                    let (x, y) = (at(a, i), at(b, i));
                    match self {
                        ReduceOp::Sum => x + y,
                        ReduceOp::Max => x.max(y),
                        ReduceOp::Bor => x | y,
                    }
                })
                .collect(),
        )
    }
}

/// Adapter for a user-supplied combining closure. The closure must be
/// associative and commutative; nothing compensates for ordering.
#[derive(Clone)]
pub struct Custom<F>(pub F);

impl<V, F: Fn(&V, &V) -> V> Reduction<V> for Custom<F> {
    fn combine(&self, a: &V, b: &V) -> V {
        (self.0)(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_ops() {
        assert_eq!(ReduceOp::Sum.combine(&3, &4), 7);
        assert_eq!(ReduceOp::Max.combine(&3, &4), 4);
        assert_eq!(ReduceOp::Bor.combine(&0b101, &0b011), 0b111);
        assert_eq!("bor".parse::<ReduceOp>().unwrap(), ReduceOp::Bor);
        assert!("mul".parse::<ReduceOp>().is_err());
    }

    #[test]
    fn multiset_sum_counts_multiplicity() {
        let a = Multiset::unit(1, 4);
        let b = ReduceOp::Sum.combine(&a, &a);
        assert_eq!(b, Multiset(vec![0, 2, 0, 0]));
        assert_eq!(b.to_string(), "m[0,2,0,0]");
    }

    #[test]
    fn value_codecs() {
        let mut buf = Vec::new();
        42u64.encode(&mut buf);
        assert_eq!(buf.len(), 8);
        assert_eq!(u64::decode(&buf).unwrap(), 42);
        assert!(u64::decode(&buf[..7]).is_err());

        let m = Multiset(vec![1, 0, 3]);
        let mut buf = Vec::new();
        m.encode(&mut buf);
        assert_eq!(Multiset::decode(&buf).unwrap(), m);
        assert!(Multiset::decode(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn custom_hook() {
        let gcd = Custom(|a: &u64, b: &u64| {
            let (mut x, mut y) = (*a, *b);
            while y != 0 {
                (x, y) = (y, x % y);
            }
            x
        });
        assert_eq!(gcd.combine(&12, &18), 6);
    }
}
