//! Which sets of inputs a result is allowed to contain, and how to read the
//! set back out of a probe result.

use std::collections::BTreeSet;

use crate::failmodel::FailurePoint;
use crate::oracle::{Inputs, Scenario};
use crate::types::ProcessId;
use crate::value::{ReduceOp, Reduction};

/// `{ S : must ⊆ S ⊆ must ∪ may }`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionFamily {
    pub must: BTreeSet<ProcessId>,
    pub may: BTreeSet<ProcessId>,
}

impl InclusionFamily {
    pub fn admits(&self, set: &BTreeSet<ProcessId>) -> bool {
        self.must.is_subset(set) && set.iter().all(|p| self.must.contains(p) || self.may.contains(p))
    }

    /// Number of member sets, saturating.
    pub fn len(&self) -> u64 {
        1u64.checked_shl(self.may.len() as u32).unwrap_or(u64::MAX)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every member set. Only sensible for small `may`.
    pub fn sets(&self) -> impl Iterator<Item = BTreeSet<ProcessId>> + '_ {
        let may: Vec<ProcessId> = self.may.iter().copied().collect();
        assert!(may.len() < 32, "inclusion family too large to enumerate");
        (0u64..1 << may.len()).map(move |mask| {
            let mut s = self.must.clone();
            s.extend(may.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &p)| p));
            s
        })
    }
}

/// Live processes must be included, inoperational ones may be, and
/// preoperational ones never are.
pub fn acceptable_inclusion_sets(scenario: &Scenario) -> InclusionFamily {
    let mut must = BTreeSet::new();
    let mut may = BTreeSet::new();
    for p in 0..scenario.n {
        match scenario.script.get(p) {
            None => {
                must.insert(p);
            }
            Some(FailurePoint::AfterSends(_)) => {
                may.insert(p);
            }
            Some(FailurePoint::Preoperational) => {}
        }
    }
    InclusionFamily { must, may }
}

/// Per-process multiplicities encoded in a probe result, or `None` when the
/// scenario's inputs do not make that readable.
///
/// Multiset values (`m[...]`) decode directly. Integer values decode as a
/// bit set when inputs are `2^p` and the op is sum or bitwise or; a sum
/// cannot show a double count this way, which is what the multiset probe
/// is for.
pub fn decode_inclusion(scenario: &Scenario, value: &str) -> Option<Vec<u32>> {
    if let Some(body) = value.strip_prefix("m[").and_then(|r| r.strip_suffix(']')) {
        let counts: Option<Vec<u32>> = body.split(',').filter(|t| !t.is_empty()).map(|t| t.parse().ok()).collect();
        return counts.filter(|c| c.len() == scenario.n);
    }
    if scenario.inputs != Inputs::Probe || scenario.n > 64 || scenario.op == ReduceOp::Max {
        return None;
    }
    let bits: u64 = value.parse().ok()?;
    if scenario.n < 64 && bits >> scenario.n != 0 {
        return None;
    }
    Some((0..scenario.n).map(|p| (bits >> p & 1) as u32).collect())
}

/// Integer results the family allows, for inputs that cannot be decoded.
/// `None` when the family is too large to enumerate.
pub(crate) fn admissible_values(scenario: &Scenario, family: &InclusionFamily) -> Option<BTreeSet<u64>> {
    if family.may.len() > 16 || scenario.uses_multiset() {
        return None;
    }
    let values = family
        .sets()
        .filter_map(|s| {
            s.iter()
                .map(|&p| scenario.inputs.value(p))
                .reduce(|a, b| scenario.op.combine(&a, &b))
        })
        .collect();
    Some(values)
}
