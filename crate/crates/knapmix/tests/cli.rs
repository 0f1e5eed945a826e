//! CLI behaviour: exit codes, output shapes, and input diagnostics.

use std::process::{Command, Output};

fn knapmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knapmix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_fig1(dir: &tempfile::TempDir) -> String {
    let path = dir.path().join("fig1.json");
    std::fs::write(&path, r#"{"weights":[5,3,2,1],"budget":9}"#).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn enumerate_lines_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(&dir);

    let lines = knapmix(&["enumerate", "--instance", &inst]);
    assert!(lines.status.success());
    let listing = stdout_of(&lines);
    let listed: Vec<&str> = listing.lines().map(|l| l.trim()).collect();
    assert_eq!(listed.len(), 14);
    assert_eq!(listed[0], "0000");
    assert!(!listed.contains(&"1110") && !listed.contains(&"1111"));

    let json = knapmix(&["enumerate", "--instance", &inst, "--format", "json"]);
    let payload: serde_json::Value = serde_json::from_str(&stdout_of(&json)).unwrap();
    assert_eq!(payload["count"], 14);
    assert_eq!(payload["solutions"].as_array().unwrap().len(), 14);
}

#[test]
fn inline_json_instances_are_accepted() {
    let out = knapmix(&[
        "count",
        "--instance",
        r#"{"weights":[5,3,2,1],"budget":9}"#,
        "--exact",
    ]);
    assert!(out.status.success());
    let payload: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(payload["count"], "14");
}

#[test]
fn sample_emits_feasible_bitstrings() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(&dir);
    let out = knapmix(&[
        "sample", "--instance", &inst, "--steps", "50", "--count", "25", "--seed", "1",
    ]);
    assert!(out.status.success());
    let fig = knapmix::KnapsackInstance::new(vec![5, 3, 2, 1], 9).unwrap();
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 25);
    for line in lines {
        let s = knapmix::Solution::parse(line).unwrap();
        assert!(fig.is_feasible(s.bits()).unwrap());
    }
}

#[test]
fn path_prints_the_blocked_example() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(&dir);
    let out = knapmix(&[
        "path", "--instance", &inst, "--from", "0111", "--to", "1100",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("flips: -3 +1 -4"), "{text}");
    assert!(
        text.contains("states: 0111 -> 0101 -> 1101 -> 1100"),
        "{text}"
    );
}

#[test]
fn audit_prints_pass_lines_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(&dir);
    let out = knapmix(&["audit", "--instance", &inst]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    for check in [
        "path-family: PASS",
        "edge-determination: PASS",
        "prefix-count-bound: PASS",
        "edge-load-bound: PASS",
    ] {
        assert!(text.contains(check), "missing {check} in {text}");
    }
}

#[test]
fn verify_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(&dir);
    let out = knapmix(&["verify", "--instance", &inst]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    for check in [
        "canonical-path-family: PASS",
        "edge-determination: PASS",
        "prefix-count-bound: PASS",
        "edge-load-bound: PASS",
        "kernel-structure: PASS",
        "spectrum: PASS",
        "mixing-bound: PASS",
        "flow-bound-consistency: PASS",
    ] {
        assert!(text.contains(check), "missing {check} in {text}");
    }
}

#[test]
fn usage_and_input_errors_exit_two() {
    // Missing --instance.
    let out = knapmix(&["enumerate"]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown flag (clap).
    let out = knapmix(&["enumerate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));

    // Malformed weight, named by index.
    let out = knapmix(&[
        "enumerate",
        "--instance",
        r#"{"weights":[1,-2],"budget":3}"#,
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weight 2"));

    // Empty instance.
    let out = knapmix(&["count", "--instance", r#"{"weights":[],"budget":0}"#]);
    assert_eq!(out.status.code(), Some(2));

    // Infeasible start state.
    let out = knapmix(&[
        "sample",
        "--instance",
        r#"{"weights":[5,3,2,1],"budget":9}"#,
        "--steps",
        "5",
        "--count",
        "1",
        "--start",
        "1111",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // JSON-only commands reject --format csv.
    let out = knapmix(&[
        "analyze",
        "--instance",
        r#"{"weights":[5,3,2,1],"budget":9}"#,
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn capacity_errors_name_the_cap() {
    let weights: Vec<String> = vec!["1".to_string(); 21];
    let inline = format!(
        r#"{{"weights":[{}],"budget":0}}"#,
        weights.join(",")
    );
    let out = knapmix(&["enumerate", "--instance", &inline]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n <= 20"));

    // Raising the cap unblocks the same instance.
    let out = knapmix(&["enumerate", "--instance", &inline, "--enum-cap", "21"]);
    assert!(out.status.success());
    assert_eq!(stdout_of(&out).lines().count(), 1);

    // Matrix cap.
    let cube = r#"{"weights":[1,1,1,1,1,1,1,1],"budget":8}"#;
    let out = knapmix(&["analyze", "--instance", cube, "--matrix-cap", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap of 100"));
}

#[test]
fn run_report_goes_to_stderr() {
    let out = knapmix(&[
        "count",
        "--instance",
        r#"{"weights":[5,3,2,1],"budget":9}"#,
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let report_line = err
        .lines()
        .find(|l| l.contains("instance_digest"))
        .expect("run report line");
    let report: serde_json::Value = serde_json::from_str(report_line).unwrap();
    assert_eq!(report["command"], "count");
    assert_eq!(report["seed"], 5);
    assert_eq!(report["instance_digest"].as_str().unwrap().len(), 64);
    assert!(report["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn analyze_writes_the_tv_curve() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(&dir);
    let curve = dir.path().join("curve.csv");
    let out = knapmix(&[
        "analyze",
        "--instance",
        &inst,
        "--epsilon",
        "0.1",
        "--tv-curve",
        curve.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,tv"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,"), "{first}");
    // Bound for eps=0.1 at n=4 is ceil(64 ln 160) = 325: rows 0..=325.
    assert_eq!(text.lines().count(), 2 + 325);
    let payload: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(payload["spectral_gap"].as_f64().unwrap() > 0.0);
    assert_eq!(payload["theorem_bound"]["0.1"], 325);
}
