use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ftcoll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftcoll")).args(args).output().unwrap()
}

fn crate_path(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tmp(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn worked_example_prints_twenty() {
    let o = ftcoll(&["run", &crate_path("scenarios/worked_example.scn")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("result 20\n"));
}

#[test]
fn failure_free_prints_phase_counts() {
    let o = ftcoll(&["run", &crate_path("scenarios/failure_free.scn")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("up-correction=6 tree=6"), "{}", stdout(&o));
}

#[test]
fn probe_inputs_print_decoded_set() {
    let o = ftcoll(&["run", &crate_path("scenarios/worked_example.scn"), "--inputs", "probe"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("decoded [0, 2, 3, 4, 5, 6]"), "{}", stdout(&o));
}

#[test]
fn over_budget_run_is_labelled() {
    let o = ftcoll(&["run", &crate_path("scenarios/over_budget.scn")]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("more than f failures"), "{out}");
    assert!(out.contains("no failure-free subtree"), "{out}");
}

#[test]
fn quiet_prints_only_verdict() {
    let o = ftcoll(&["run", &crate_path("scenarios/allreduce_rotation.scn"), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "verdict pass\n");
}

#[test]
fn traces_are_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (tmp(&dir, "a"), tmp(&dir, "b"));
    for p in [&a, &b] {
        let o = ftcoll(&["run", &crate_path("scenarios/allreduce_rotation.scn"), "--quiet", "--trace", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn check_agrees_with_run_and_catches_edits() {
    let dir = tempfile::tempdir().unwrap();
    let trace = tmp(&dir, "t");
    let scenario = crate_path("scenarios/worked_example.scn");
    ftcoll(&["run", &scenario, "--quiet", "--trace", trace.to_str().unwrap()]);
    let o = ftcoll(&["check", trace.to_str().unwrap(), &scenario]);
    assert_eq!(o.status.code(), Some(0));

    let text = std::fs::read_to_string(&trace).unwrap();
    let cut: String = text.lines().filter(|l| !l.contains("kind=deliver actor=4 ")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&trace, cut).unwrap();
    let o = ftcoll(&["check", trace.to_str().unwrap(), &scenario]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("R5 fail"));

    std::fs::write(&trace, "not a trace\n").unwrap();
    assert_eq!(ftcoll(&["check", trace.to_str().unwrap(), &scenario]).status.code(), Some(2));
}

#[test]
fn golden_trace_keeps_its_verdict() {
    let o = ftcoll(&["check", &crate_path("tests/fixtures/worked_example.trace"), &crate_path("tests/fixtures/worked_example.scn")]);
    assert_eq!(o.status.code(), Some(0));
    let expected = std::fs::read_to_string(crate_path("tests/fixtures/worked_example.verdict")).unwrap();
    assert_eq!(stdout(&o), expected);
}

#[test]
fn golden_trace_is_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    let trace = tmp(&dir, "t");
    ftcoll(&["run", &crate_path("tests/fixtures/worked_example.scn"), "--quiet", "--trace", trace.to_str().unwrap()]);
    let golden = std::fs::read_to_string(crate_path("tests/fixtures/worked_example.trace")).unwrap();
    assert_eq!(std::fs::read_to_string(trace).unwrap(), golden);
}

#[test]
fn bad_scenarios_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = tmp(&dir, "s");
    std::fs::write(&path, "n 4\nf 1\nwobble 3\n").unwrap();
    let o = ftcoll(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert_eq!(ftcoll(&["run"]).status.code(), Some(2));
    assert_eq!(ftcoll(&["run", "/nonexistent/scenario"]).status.code(), Some(2));
}

#[test]
fn sweep_prints_table_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let records = tmp(&dir, "r.jsonl");
    let o = ftcoll(&["sweep", "--n-range", "4..9", "--f-range", "0..2", "--trials", "3", "--records", records.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.starts_with("   n   f  upc-form  upc-meas"));
    assert!(out.contains("trials 54 failed 0"));
    let lines = std::fs::read_to_string(records).unwrap();
    assert_eq!(lines.lines().count(), 54);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["pass"], true);
}

#[test]
fn tcp_run_through_workers() {
    let o = ftcoll(&["run", &crate_path("scenarios/tcp_worked_example.scn")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("result 20\n"));
}
