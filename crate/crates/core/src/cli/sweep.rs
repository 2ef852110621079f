//! Randomized scenario sweeps over an `(n, f)` grid, run in parallel.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::harness::run_and_check;
use crate::cli::scenario_file::render_scenario;
use crate::collectives::{default_candidates, Scheme};
use crate::error::Result;
use crate::failmodel::{FailurePoint, FailureScript};
use crate::oracle::{check_scheme_equivalence, expected_upcorrection_messages, Check, Collective, Scenario};
use crate::trace::{EventKind, Trace};
use crate::types::Phase;

#[derive(Debug, Clone)]
pub struct SweepParams {
    pub n_range: RangeInclusive<usize>,
    pub f_range: RangeInclusive<usize>,
    /// Random scenarios per `(n, f)` cell.
    pub trials: usize,
    pub seed: u64,
    pub collectives: Vec<Collective>,
    /// Run every trial under all three schemes and compare them.
    pub all_schemes: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            n_range: 1..=32,
            f_range: 0..=4,
            trials: 10,
            seed: 0,
            collectives: vec![Collective::Reduce, Collective::Allreduce],
            all_schemes: true,
        }
    }
}

/// A random scenario for `(n, f)` within the guaranteed number of
/// failures. Allreduce root candidates only ever fail before the start.
pub fn random_scenario(rng: &mut impl Rng, n: usize, f: usize, collectives: &[Collective]) -> Scenario {
    let collective = *collectives.choose(rng).expect("at least one collective");
    let mut s = Scenario::new(n, f);
    s.collective = collective;
    s.seed = rng.gen();
    s.root = rng.gen_range(0..n);
    s.scheme = *Scheme::ALL.choose(rng).unwrap();
    s.latency = (1, rng.gen_range(1..=20));
    if rng.gen_bool(0.3) {
        s.start_skew = rng.gen_range(1..=30);
    }

    let candidates = default_candidates(n, f);
    let k = rng.gen_range(0..=s.tolerance());
    let mut victims: Vec<usize> = (0..n).collect();
    victims.shuffle(rng);
    let mut script = FailureScript::new();
    for &p in &victims[..k] {
        let candidate = collective == Collective::Allreduce && candidates.contains(&p);
        let point = if candidate || rng.gen_bool(0.3) {
            FailurePoint::Preoperational
        } else {
            FailurePoint::AfterSends(rng.gen_range(0..=2 * f + 3))
        };
        script.insert(p, point);
    }
    s.script = script;
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub n: usize,
    pub f: usize,
    pub trial: usize,
    pub collective: String,
    pub pass: bool,
    pub violated: Vec<String>,
    /// Reduce phases seen in the trace.
    pub rounds: usize,
    pub scenario: String,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub n: usize,
    pub f: usize,
    pub upcorrection_formula: usize,
    pub upcorrection_measured: usize,
    pub tree_measured: usize,
    pub trials: usize,
    pub passed: usize,
    pub max_allreduce_rounds: usize,
}

impl CellSummary {
    pub fn counts_match(&self) -> bool {
        self.upcorrection_formula == self.upcorrection_measured && self.tree_measured + 1 == self.n.max(1)
    }
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub cells: Vec<CellSummary>,
    pub records: Vec<SweepRecord>,
}

impl SweepSummary {
    pub fn total(&self) -> usize {
        self.records.len()
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn clean(&self) -> bool {
        self.failures().next().is_none() && self.cells.iter().all(CellSummary::counts_match)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4} {:>3} {:>9} {:>9} {:>6} {:>7} {:>7} {:>7}",
            "n", "f", "upc-form", "upc-meas", "tree", "trials", "passed", "rounds"
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:>4} {:>3} {:>9} {:>9} {:>6} {:>7} {:>7} {:>7}",
                c.n,
                c.f,
                c.upcorrection_formula,
                c.upcorrection_measured,
                c.tree_measured,
                c.trials,
                c.passed,
                c.max_allreduce_rounds
            );
        }
        out
    }
}

fn reduce_rounds(trace: &Trace) -> usize {
    trace
        .iter()
        .filter(|e| e.kind == EventKind::Init && e.note_tag() == "reduce")
        .map(|e| e.op)
        .collect::<BTreeSet<_>>()
        .len()
}

/// Judges one scenario, and with `all_schemes` also its two sibling runs
/// under the other failure-information schemes. Returns the checks and
/// the number of reduce phases.
pub fn run_trial(s: &Scenario, all_schemes: bool) -> Result<(Vec<Check>, usize)> {
    if !all_schemes {
        let (exec, verdict) = run_and_check(s)?;
        return Ok((verdict.checks, reduce_rounds(&exec.trace)));
    }
    let mut checks = Vec::new();
    let mut traces = Vec::new();
    for scheme in Scheme::ALL {
        let (exec, verdict) = run_and_check(&Scenario { scheme, ..s.clone() })?;
        checks.extend(verdict.checks.into_iter().map(|mut c| {
            c.evidence = format!("[{scheme}] {}", c.evidence);
            c
        }));
        traces.push(exec.trace);
    }
    checks.push(check_scheme_equivalence(&traces[0], &traces[1], &traces[2]));
    Ok((checks, reduce_rounds(&traces[0])))
}

fn trial_record(params: &SweepParams, n: usize, f: usize, trial: usize) -> SweepRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ ((n as u64) << 32 | f as u64));
    rng.set_stream(trial as u64);
    let s = random_scenario(&mut rng, n, f, &params.collectives);
    let (pass, violated, evidence, rounds) = match run_trial(&s, params.all_schemes) {
        Ok((checks, rounds)) => {
            let bad: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
            (
                bad.is_empty(),
                bad.iter().map(|c| c.id.to_string()).collect(),
                bad.iter().map(|c| c.to_string()).collect(),
                rounds,
            )
        }
        Err(e) => (false, vec!["error".into()], vec![e.to_string()], 0),
    };
    SweepRecord {
        n,
        f,
        trial,
        collective: s.collective.to_string(),
        pass,
        violated,
        rounds,
        scenario: render_scenario(&s),
        evidence,
    }
}

fn failure_free_counts(n: usize, f: usize) -> Result<(usize, usize)> {
    let (exec, _) = run_and_check(&Scenario::new(n, f))?;
    Ok((exec.trace.sends_in(Phase::UpCorrection), exec.trace.sends_in(Phase::Tree)))
}

pub fn sweep(params: &SweepParams) -> Result<SweepSummary> {
    let grid: Vec<(usize, usize)> = params
        .n_range
        .clone()
        .filter(|&n| n >= 1)
        .flat_map(|n| params.f_range.clone().map(move |f| (n, f)))
        .collect();

    let records: Vec<SweepRecord> = grid
        .par_iter()
        .flat_map_iter(|&(n, f)| (0..params.trials).map(move |t| (n, f, t)))
        .map(|(n, f, t)| trial_record(params, n, f, t))
        .collect();

    let measured = grid
        .par_iter()
        .map(|&(n, f)| failure_free_counts(n, f))
        .collect::<Result<Vec<_>>>()?;

    let cells = grid
        .iter()
        .zip(measured)
        .map(|(&(n, f), (upc, tree))| {
            let mine = records.iter().filter(|r| r.n == n && r.f == f);
            CellSummary {
                n,
                f,
                upcorrection_formula: expected_upcorrection_messages(n, f),
                upcorrection_measured: upc,
                tree_measured: tree,
                trials: params.trials,
                passed: mine.clone().filter(|r| r.pass).count(),
                max_allreduce_rounds: mine.filter(|r| r.collective == "allreduce").map(|r| r.rounds).max().unwrap_or(0),
            }
        })
        .collect();
    Ok(SweepSummary { cells, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_respect_budget_and_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..2000 {
            let s = random_scenario(&mut rng, 1 + i % 32, i % 5, &[Collective::Reduce, Collective::Allreduce]);
            assert!(s.within_guarantee());
            s.validate().unwrap();
            if s.collective == Collective::Allreduce {
                for c in &s.candidates {
                    assert!(s.script.get(*c).is_none_or(|p| p == FailurePoint::Preoperational));
                }
            }
        }
    }

    #[test]
    fn small_sweep_is_clean() {
        let summary = sweep(&SweepParams { n_range: 1..=12, f_range: 0..=3, trials: 4, ..SweepParams::default() }).unwrap();
        let bad: Vec<_> = summary.failures().collect();
        assert!(bad.is_empty(), "{bad:#?}");
        assert!(summary.clean(), "{}", summary.render_table());
        assert_eq!(summary.total(), 12 * 4 * 4);
    }

    #[test]
    fn zero_tolerance_column_has_no_upcorrection() {
        let summary = sweep(&SweepParams { n_range: 4..=16, f_range: 0..=0, trials: 1, ..SweepParams::default() }).unwrap();
        assert!(summary.cells.iter().all(|c| c.upcorrection_measured == 0));
    }
}
