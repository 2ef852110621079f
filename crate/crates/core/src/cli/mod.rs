//! Command-line front end: scenario files, the run harness, sweeps, and the
//! `ftcoll` subcommands.

pub mod commands;
pub mod harness;
pub mod scenario_file;
pub mod sweep;
pub mod tcprun;

pub use harness::{judge, run_and_check, run_sim, Execution, ProcessResult, RUN_OP};
pub use scenario_file::{parse_scenario, render_scenario};
pub use sweep::{random_scenario, sweep, CellSummary, SweepParams, SweepRecord, SweepSummary};
pub use tcprun::{run_tcp_processes, run_tcp_threads};
