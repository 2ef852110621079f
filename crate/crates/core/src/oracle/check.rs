//! Trace-level property checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::collectives::FailureInfo;
use crate::error::Result;
use crate::oracle::causality::HappensBefore;
use crate::oracle::counts::{expected_tree_messages, expected_upcorrection_messages, max_broadcast_messages};
use crate::oracle::inclusion::{acceptable_inclusion_sets, admissible_values, decode_inclusion, InclusionFamily};
use crate::oracle::Scenario;
use crate::trace::{EventKind, Trace, TraceEvent};
use crate::types::{OpId, Phase, ProcessId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub id: &'static str,
    pub pass: bool,
    pub evidence: String,
}

impl Check {
    fn new(id: &'static str, outcome: std::result::Result<String, String>) -> Self {
        match outcome {
            Ok(evidence) => Check { id, pass: true, evidence },
            Err(evidence) => Check { id, pass: false, evidence },
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.id, if self.pass { "pass" } else { "fail" }, self.evidence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub checks: Vec<Check>,
    /// False when the scenario scripts more than `f` failures, in which case
    /// violations are expected rather than bugs.
    pub within_guarantee: bool,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn violated(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.id).collect()
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        let violated = self.violated();
        if violated.is_empty() {
            out.push_str("verdict pass");
        } else {
            out.push_str(&format!("verdict fail violated={}", violated.join(",")));
        }
        if !self.within_guarantee {
            out.push_str(" (more than f failures scripted)");
        }
        out.push('\n');
        out
    }
}

type Outcome = std::result::Result<String, String>;

/// Shared view of a trace: who failed, and where inits and delivers are.
struct Facts<'t> {
    trace: &'t Trace,
    hb: HappensBefore,
    failed: BTreeSet<ProcessId>,
}

impl<'t> Facts<'t> {
    fn new(trace: &'t Trace) -> Result<Self> {
        let hb = HappensBefore::build(trace)?;
        let failed = trace.iter().filter(|e| e.kind == EventKind::Fail).map(|e| e.actor).collect();
        Ok(Facts { trace, hb, failed })
    }

    fn live(&self, n: usize) -> impl Iterator<Item = ProcessId> + '_ {
        (0..n).filter(|p| !self.failed.contains(p))
    }

    fn find(&self, kind: EventKind, tag: &str) -> Vec<usize> {
        self.trace
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == kind && e.note_tag() == tag)
            .map(|(i, _)| i)
            .collect()
    }

    fn ev(&self, i: usize) -> &TraceEvent {
        &self.trace.events[i]
    }

    /// Every live process has an init for `op` that happens before `deliver`.
    fn inits_precede(&self, n: usize, op: Option<OpId>, tag: &str, deliver: usize) -> Outcome {
        let inits = self.find(EventKind::Init, tag);
        for p in self.live(n) {
            let init = inits.iter().copied().find(|&i| self.ev(i).actor == p && self.ev(i).op == op);
            match init {
                None => return Err(format!("live {p} has no {tag} init before deliver seq={}", self.ev(deliver).seq)),
                Some(i) if !self.hb.precedes(i, deliver) => {
                    return Err(format!(
                        "init seq={} of {p} does not happen before deliver seq={}",
                        self.ev(i).seq,
                        self.ev(deliver).seq
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(format!("all live inits precede deliver seq={}", self.ev(deliver).seq))
    }

    /// At most one deliver per process and op, across every collective.
    fn deliver_once(&self) -> Outcome {
        let mut seen: BTreeMap<(ProcessId, Option<OpId>, &str), u64> = BTreeMap::new();
        for e in self.trace.iter().filter(|e| e.kind == EventKind::Deliver) {
            if let Some(first) = seen.insert((e.actor, e.op, e.note_tag()), e.seq) {
                return Err(format!("{} delivered twice: seq={first} and seq={}", e.actor, e.seq));
            }
        }
        Ok(format!("{} delivers, none repeated", seen.len()))
    }

    /// Every live process delivers `tag` for `op` (or for any op when `op`
    /// is `None`).
    fn live_deliver(&self, n: usize, tag: &str, op: Option<Option<OpId>>) -> Outcome {
        let delivers = self.find(EventKind::Deliver, tag);
        let missing: Vec<ProcessId> = self
            .live(n)
            .filter(|&p| !delivers.iter().any(|&i| self.ev(i).actor == p && op.is_none_or(|o| self.ev(i).op == o)))
            .collect();
        if missing.is_empty() {
            Ok(format!("{} live processes delivered", self.live(n).count()))
        } else {
            Err(format!("live processes without {tag} deliver: {missing:?}"))
        }
    }

    fn sends(&self, phases: &[Phase]) -> usize {
        self.trace
            .iter()
            .filter(|e| e.kind == EventKind::Send && e.phase.is_some_and(|p| phases.contains(&p)))
            .count()
    }
}

/// Judges a delivered value against the family: `(includes every live
/// input, contains nothing else and nothing twice)`.
fn judge_value(s: &Scenario, fam: &InclusionFamily, value: &str) -> (Outcome, Outcome) {
    if let Some(counts) = decode_inclusion(s, value) {
        let set: BTreeSet<ProcessId> = (0..s.n).filter(|&p| counts[p] > 0).collect();
        let missing: Vec<ProcessId> = fam.must.difference(&set).copied().collect();
        let includes = if missing.is_empty() {
            Ok(format!("decoded {set:?}"))
        } else {
            Err(format!("decoded {set:?} lacks live {missing:?}"))
        };
        let doubled: Vec<ProcessId> = (0..s.n).filter(|&p| counts[p] > 1).collect();
        let extra: Vec<ProcessId> = set.iter().copied().filter(|p| !fam.must.contains(p) && !fam.may.contains(p)).collect();
        let exact = if !doubled.is_empty() {
            Err(format!("inputs of {doubled:?} counted more than once"))
        } else if !extra.is_empty() {
            Err(format!("decoded set contains preoperationally failed {extra:?}"))
        } else {
            Ok(format!("each input at most once, {} sets admissible", fam.len()))
        };
        return (includes, exact);
    }
    match admissible_values(s, fam) {
        Some(values) => {
            let ok = value.parse::<u64>().is_ok_and(|v| values.contains(&v));
            let r = if ok {
                Ok(format!("value {value} admissible"))
            } else {
                Err(format!("value {value} not among admissible {values:?}"))
            };
            (r.clone(), r)
        }
        None => {
            let r: Outcome = Ok("unchecked: family too large to enumerate".into());
            (r.clone(), r)
        }
    }
}

fn check_ops_distinct(ops: &BTreeSet<Option<OpId>>, what: &str) -> Result<Option<Option<OpId>>> {
    match ops.len() {
        0 => Ok(None),
        1 => Ok(ops.iter().next().copied()),
        _ => Err(crate::error::Error::MalformedTrace(format!("several {what} operations in one trace"))),
    }
}

/// Reduce properties R1 to R5 plus message counts.
pub fn check_reduce_trace(trace: &Trace, scenario: &Scenario) -> Result<Verdict> {
    let facts = Facts::new(trace)?;
    let n = scenario.n;
    let root = scenario.root;
    let ops: BTreeSet<Option<OpId>> = facts.find(EventKind::Init, "reduce").into_iter().map(|i| facts.ev(i).op).collect();
    let op = check_ops_distinct(&ops, "reduce")?;
    let fam = acceptable_inclusion_sets(scenario);

    let root_deliver = facts
        .find(EventKind::Deliver, "reduce")
        .into_iter()
        .find(|&i| facts.ev(i).actor == root && Some(facts.ev(i).op) == op);

    let mut checks = Vec::new();
    checks.push(Check::new(
        "R1",
        match root_deliver {
            Some(d) => facts.inits_precede(n, op.flatten(), "reduce", d),
            None => Ok("root did not deliver".into()),
        },
    ));
    checks.push(Check::new("R2", facts.deliver_once()));

    let (r3, r4) = match root_deliver {
        Some(d) => match facts.ev(d).note_field("value") {
            Some(v) => judge_value(scenario, &fam, v),
            None => {
                let e = Err(format!("root deliver seq={} has no value", facts.ev(d).seq));
                (e.clone(), e)
            }
        },
        None => (Ok("no root value".into()), Ok("no root value".into())),
    };
    checks.push(Check::new("R3", r3));
    checks.push(Check::new("R4", r4));
    checks.push(Check::new("R5", facts.live_deliver(n, "reduce", op)));
    checks.push(Check::new("counts", reduce_counts(&facts, scenario)));

    Ok(Verdict { checks, within_guarantee: scenario.within_guarantee() })
}

fn reduce_counts(facts: &Facts, s: &Scenario) -> Outcome {
    let upc = facts.sends(&[Phase::UpCorrection]);
    let tree = facts.sends(&[Phase::Tree]);
    let want_upc = expected_upcorrection_messages(s.n, s.f);
    let want_tree = expected_tree_messages(s.n);
    let got = format!("up-correction {upc}/{want_upc}, tree {tree}/{want_tree}");
    if facts.failed.is_empty() {
        return if upc == want_upc && tree == want_tree { Ok(got) } else { Err(got) };
    }
    if upc > want_upc || tree > want_tree {
        return Err(format!("{got}: more than failure-free"));
    }
    // A failed process always loses at least one send, except an ungrouped
    // root, which never sends.
    let root_grouped = s.n > 1 && (s.n - 1) % (s.f + 1) != 0;
    let must_lose = facts.failed.iter().any(|&p| p != s.root || root_grouped);
    if must_lose && upc + tree == want_upc + want_tree {
        return Err(format!("{got}: failures but no send lost"));
    }
    Ok(got)
}

/// Allreduce properties A1 to A5 plus the message bound.
pub fn check_allreduce_trace(trace: &Trace, scenario: &Scenario) -> Result<Verdict> {
    let facts = Facts::new(trace)?;
    let n = scenario.n;
    let ops: BTreeSet<Option<OpId>> = facts.find(EventKind::Init, "allreduce").into_iter().map(|i| facts.ev(i).op).collect();
    let op = check_ops_distinct(&ops, "allreduce")?;
    let fam = acceptable_inclusion_sets(scenario);
    let delivers: Vec<usize> = facts
        .find(EventKind::Deliver, "allreduce")
        .into_iter()
        .filter(|&i| Some(facts.ev(i).op) == op)
        .collect();

    let mut checks = Vec::new();
    let a1 = delivers
        .iter()
        .map(|&d| facts.inits_precede(n, op.flatten(), "allreduce", d))
        .find(|r| r.is_err())
        .unwrap_or_else(|| Ok(format!("all live inits precede each of {} delivers", delivers.len())));
    checks.push(Check::new("A1", a1));
    checks.push(Check::new("A2", facts.deliver_once()));
    checks.push(Check::new("A3", facts.live_deliver(n, "allreduce", op)));

    let mut a4: Outcome = Ok(format!("{} delivered values checked", delivers.len()));
    let mut values: BTreeMap<String, Vec<ProcessId>> = BTreeMap::new();
    for &d in &delivers {
        let e = facts.ev(d);
        let Some(v) = e.note_field("value") else {
            a4 = Err(format!("deliver seq={} has no value", e.seq));
            continue;
        };
        values.entry(v.to_string()).or_default().push(e.actor);
        let (includes, exact) = judge_value(scenario, &fam, v);
        if let Err(msg) = includes.and(exact) {
            if a4.is_ok() {
                a4 = Err(format!("deliver seq={} at {}: {msg}", e.seq, e.actor));
            }
        }
    }
    checks.push(Check::new("A4", a4));
    let a5 = if values.len() <= 1 {
        Ok(match values.keys().next() {
            Some(v) => format!("all delivered {v}"),
            None => "no delivers".into(),
        })
    } else {
        Err(format!("processes disagree: {values:?}"))
    };
    checks.push(Check::new("A5", a5));
    checks.push(Check::new("counts", allreduce_counts(&facts, scenario)));

    Ok(Verdict { checks, within_guarantee: scenario.within_guarantee() })
}

fn allreduce_counts(facts: &Facts, s: &Scenario) -> Outcome {
    let reduce_once = expected_upcorrection_messages(s.n, s.f) + expected_tree_messages(s.n);
    let once = reduce_once + max_broadcast_messages(s.n, s.f);
    let bound = (s.f + 1) * once;
    let total = facts.trace.total_sends();
    let rounds = facts
        .find(EventKind::Init, "reduce")
        .into_iter()
        .map(|i| facts.ev(i).op)
        .collect::<BTreeSet<_>>()
        .len();
    let got = format!("{total} sends over {rounds} reduce phases, bound {bound}");
    if total > bound {
        return Err(got);
    }
    if facts.failed.is_empty() {
        let reduce_sends = facts.sends(&[Phase::UpCorrection, Phase::Tree]);
        if rounds != 1 || reduce_sends != reduce_once {
            return Err(format!("{got}: failure-free run needs one round of {reduce_once} reduce sends, saw {reduce_sends}"));
        }
    }
    Ok(got)
}

/// Runs of one scenario under the list, count and bit schemes with the same
/// seed must differ only in how failure information is spelled: the count
/// equals the list's size, and the count's subtree bit equals the bit
/// scheme's bit.
pub fn check_scheme_equivalence(list: &Trace, count: &Trace, bit: &Trace) -> Check {
    let sends = |t: &Trace| -> Vec<TraceEvent> { t.iter().filter(|e| e.kind == EventKind::Send).cloned().collect() };
    let (l, c, b) = (sends(list), sends(count), sends(bit));
    if l.len() != c.len() || l.len() != b.len() {
        return Check::new("schemes", Err(format!("send counts differ: {} / {} / {}", l.len(), c.len(), b.len())));
    }
    for ((el, ec), eb) in l.iter().zip(&c).zip(&b) {
        let same_route = |x: &TraceEvent, y: &TraceEvent| {
            (x.actor, x.peer, x.op, x.phase, x.note_field("value")) == (y.actor, y.peer, y.op, y.phase, y.note_field("value"))
        };
        if !same_route(el, ec) || !same_route(el, eb) {
            return Check::new("schemes", Err(format!("runs diverge at send seq={}", el.seq)));
        }
        let fi = |e: &TraceEvent| e.note_field("fi").and_then(|s| s.parse::<FailureInfo>().ok());
        let ok = match (fi(el), fi(ec), fi(eb)) {
            (Some(FailureInfo::List(ids)), Some(FailureInfo::Count { failed, subtree_failed }), Some(FailureInfo::Bit(bit))) => {
                ids.len() == failed as usize && subtree_failed == bit
            }
            _ => false,
        };
        if !ok {
            return Check::new(
                "schemes",
                Err(format!(
                    "send seq={}: {} vs {} vs {}",
                    el.seq,
                    el.note_field("fi").unwrap_or("?"),
                    ec.note_field("fi").unwrap_or("?"),
                    eb.note_field("fi").unwrap_or("?")
                )),
            );
        }
    }
    Check::new("schemes", Ok(format!("{} sends agree", l.len())))
}
