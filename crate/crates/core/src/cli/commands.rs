//! The `ftcoll` subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::cli::harness::{judge, run_sim, Execution};
use crate::cli::scenario_file::{parse_scenario, read_input_values};
use crate::cli::sweep::{sweep, SweepParams};
use crate::cli::tcprun::{run_tcp_processes, worker_main};
use crate::error::{Error, Result};
use crate::oracle::{decode_inclusion, Collective, Inputs, Scenario, TransportKind, Verdict};
use crate::tcpnet::Registry;
use crate::trace::Trace;
use crate::types::Phase;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "ftcoll", version, about = "Fault-tolerant reduce and allreduce: simulate, sweep, check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and judge its trace.
    Run {
        scenario: PathBuf,
        /// Write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print only the verdict line.
        #[arg(long)]
        quiet: bool,
        /// Override the scenario's inputs: probe, ids, ones, multiset or file:<path>.
        #[arg(long)]
        inputs: Option<String>,
    },
    /// Failure-free counts and random failure trials over an (n, f) grid.
    Sweep {
        /// Inclusive range such as `4..16`, or a single value.
        #[arg(long, default_value = "2..16")]
        n_range: String,
        #[arg(long, default_value = "0..3")]
        f_range: String,
        /// Random trials per cell.
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one JSON record per trial here.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Judge a saved trace against its scenario.
    Check { trace: PathBuf, scenario: PathBuf },
    /// One rank of a multi-process TCP run (started by `run`).
    Worker {
        #[arg(long)]
        deployment: PathBuf,
        #[arg(long)]
        pid: usize,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        fail_after_sends: Option<usize>,
    },
}

fn parse_range(text: &str) -> Result<RangeInclusive<usize>> {
    let bad = || Error::invalid(format!("bad range `{text}`"));
    let (lo, hi) = match text.split_once("..") {
        Some((lo, hi)) => (lo, hi.trim_start_matches('=')),
        None => (text, text),
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text, path.parent())
}

fn override_inputs(s: &mut Scenario, choice: &str) -> Result<()> {
    s.inputs = match choice {
        "probe" => Inputs::Probe,
        "ids" => Inputs::Ids,
        "ones" => Inputs::Ones,
        "multiset" => Inputs::Multiset,
        _ => match choice.strip_prefix("file:") {
            Some(path) => read_input_values(Path::new(path))?,
            None => return Err(Error::invalid(format!("unknown inputs `{choice}`"))),
        },
    };
    s.validate()
}

fn execute(s: &Scenario) -> Result<Execution> {
    match s.transport {
        TransportKind::Sim => run_sim(s),
        TransportKind::Tcp => {
            let exe = std::env::current_exe()?;
            let budget = Duration::from_millis(s.probe_timeout_ms) * s.probe_retries.max(1);
            run_tcp_processes(s, &exe, Duration::from_secs(30) + budget * 4 * (s.f as u32 + 2))
        }
    }
}

fn report(out: &mut impl Write, s: &Scenario, exec: &Execution, verdict: &Verdict) -> std::io::Result<()> {
    for (p, r) in exec.results.iter().enumerate() {
        writeln!(out, "process {p}: {r}")?;
    }
    let shown = match s.collective {
        Collective::Reduce => exec.value(s.root),
        Collective::Allreduce => (0..s.n).find_map(|p| exec.value(p)),
    };
    if let Some(v) = shown {
        writeln!(out, "result {v}")?;
        if let Some(counts) = decode_inclusion(s, v) {
            let set: Vec<usize> = (0..s.n).filter(|&p| counts[p] > 0).collect();
            writeln!(out, "decoded {set:?}")?;
        }
    }
    let t = &exec.trace;
    writeln!(
        out,
        "messages up-correction={} tree={} broadcast-tree={} broadcast-correction={} total={}",
        t.sends_in(Phase::UpCorrection),
        t.sends_in(Phase::Tree),
        t.sends_in(Phase::BroadcastTree),
        t.sends_in(Phase::BroadcastCorrection),
        t.total_sends()
    )?;
    write!(out, "{}", verdict.render())
}

fn exit_for(verdict: &Verdict) -> u8 {
    if verdict.pass() {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}

fn cmd_run(path: &Path, trace: Option<&Path>, quiet: bool, inputs: Option<&str>) -> Result<u8> {
    let mut s = load_scenario(path)?;
    if let Some(choice) = inputs {
        override_inputs(&mut s, choice)?;
    }
    let exec = execute(&s)?;
    if let Some(p) = trace {
        std::fs::write(p, exec.trace.render())?;
    }
    let verdict = judge(&s, &exec.trace)?;
    let mut out = std::io::stdout().lock();
    if quiet {
        let last = verdict.render();
        write!(out, "{}", last.lines().last().map(|l| format!("{l}\n")).unwrap_or_default())?;
    } else {
        report(&mut out, &s, &exec, &verdict)?;
    }
    Ok(exit_for(&verdict))
}

fn cmd_check(trace: &Path, scenario: &Path) -> Result<u8> {
    let s = load_scenario(scenario)?;
    let trace = Trace::parse(&std::fs::read_to_string(trace)?)?;
    let verdict = judge(&s, &trace)?;
    print!("{}", verdict.render());
    Ok(exit_for(&verdict))
}

fn cmd_sweep(n_range: &str, f_range: &str, trials: usize, seed: u64, records: Option<&Path>) -> Result<u8> {
    let params = SweepParams {
        n_range: parse_range(n_range)?,
        f_range: parse_range(f_range)?,
        trials,
        seed,
        ..SweepParams::default()
    };
    if *params.n_range.start() == 0 {
        return Err(Error::invalid("n starts at 1"));
    }
    let summary = sweep(&params)?;
    let mut out = std::io::stdout().lock();
    write!(out, "{}", summary.render_table())?;
    let failures: Vec<_> = summary.failures().collect();
    writeln!(out, "trials {} failed {}", summary.total(), failures.len())?;
    for r in &failures {
        writeln!(out, "trial n={} f={} #{} violated {}", r.n, r.f, r.trial, r.violated.join(","))?;
    }
    if let Some(path) = records {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &summary.records {
            serde_json::to_writer(&mut file, r).map_err(|e| Error::Io(e.into()))?;
            writeln!(file)?;
        }
        file.flush()?;
    }
    Ok(if summary.clean() { EXIT_PASS } else { EXIT_VIOLATION })
}

fn cmd_worker(deployment: &Path, pid: usize, scenario: &Path, fail_after_sends: Option<usize>) -> Result<u8> {
    let s = load_scenario(scenario)?;
    let registry = Registry::parse(&std::fs::read_to_string(deployment)?)?;
    if registry.len() != s.n {
        return Err(Error::invalid(format!("deployment lists {} processes, scenario has {}", registry.len(), s.n)));
    }
    worker_main(&s, registry, pid, fail_after_sends)?;
    Ok(EXIT_PASS)
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 pass, 1 property violation, 2 usage or input error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let outcome = match &cli.command {
        Command::Run { scenario, trace, quiet, inputs } => cmd_run(scenario, trace.as_deref(), *quiet, inputs.as_deref()),
        Command::Sweep { n_range, f_range, trials, seed, records } => {
            cmd_sweep(n_range, f_range, *trials, *seed, records.as_deref())
        }
        Command::Check { trace, scenario } => cmd_check(trace, scenario),
        Command::Worker { deployment, pid, scenario, fail_after_sends } => {
            cmd_worker(deployment, *pid, scenario, *fail_after_sends)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ftcoll: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("4..16").unwrap(), 4..=16);
        assert_eq!(parse_range("4..=16").unwrap(), 4..=16);
        assert_eq!(parse_range("3").unwrap(), 3..=3);
        assert!(parse_range("5..2").is_err());
        assert!(parse_range("x").is_err());
    }
}
