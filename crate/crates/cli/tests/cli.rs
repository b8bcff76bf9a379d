//! Harness-level behavior: scenario parsing, artifact layout, report
//! completeness, certification outcomes, and the binary's exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

use splitmpc::scenario::Scenario;
use splitmpc_cli::{
    certify_command, compare_command, exit_code, parse_scenario, run_command, TRACE_HEADER,
};

fn write_scenario(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn short_scenario() -> Scenario {
    Scenario {
        steps: 8,
        ..Scenario::default()
    }
}

#[test]
fn empty_scenario_file_means_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "empty.json", "{}");
    let scenario = parse_scenario(&path).unwrap();
    assert_eq!(scenario, Scenario::default());
}

#[test]
fn scenario_errors_name_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();

    let missing = parse_scenario(&dir.path().join("nope.json")).unwrap_err();
    assert_eq!(missing.code, exit_code::VALIDATION);
    assert!(missing.message.contains("nope.json"), "{}", missing.message);

    let garbled = write_scenario(dir.path(), "bad.json", "{not json");
    let err = parse_scenario(&garbled).unwrap_err();
    assert_eq!(err.code, exit_code::VALIDATION);
    assert!(err.message.contains("malformed"), "{}", err.message);

    let bad_dt = write_scenario(dir.path(), "dt.json", r#"{"dt1": -0.2}"#);
    let err = parse_scenario(&bad_dt).unwrap_err();
    assert_eq!(err.code, exit_code::VALIDATION);
    assert!(err.message.contains("dt1"), "{}", err.message);

    let bad_scheme = write_scenario(dir.path(), "scheme.json", r#"{"schemes": ["warp"]}"#);
    let err = parse_scenario(&bad_scheme).unwrap_err();
    assert!(err.message.contains("schemes[0]"), "{}", err.message);
}

#[test]
fn obstacles_can_be_overridden_to_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "clear.json", r#"{"obstacles": []}"#);
    let scenario = parse_scenario(&path).unwrap();
    assert!(scenario.obstacles.is_empty());
}

#[test]
fn run_writes_a_full_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario::default();
    let output = run_command(&scenario, "proposed", dir.path()).unwrap();
    assert_eq!(output.summary.n_decision_vars, 28);

    let csv = fs::read_to_string(dir.path().join("proposed_trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TRACE_HEADER);
    assert_eq!(lines.len(), 51); // header plus one row per step

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("proposed_summary.json")).unwrap())
            .unwrap();
    for key in [
        "scheme",
        "V_star",
        "median_solve_ms",
        "n_decision_vars",
        "horizon_span_s",
        "converged_fraction",
    ] {
        assert!(summary.get(key).is_some(), "missing key {key}");
    }
}

#[test]
fn run_at_the_reference_costs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = short_scenario();
    scenario.x0 = scenario.x_ref;
    let output = run_command(&scenario, "standard-10", dir.path()).unwrap();
    assert!(output.summary.v_star.abs() <= 1e-9, "{}", output.summary.v_star);
}

#[test]
fn run_rejects_unknown_schemes_as_usage() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_command(&Scenario::default(), "warp", dir.path()).unwrap_err();
    assert_eq!(err.code, exit_code::USAGE);
}

#[test]
fn compare_emits_one_row_per_requested_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario();
    let schemes = vec![
        "standard-10".to_string(),
        "warp".to_string(), // fails, but its row must still appear
        "proposed".to_string(),
    ];
    let report = compare_command(&scenario, &schemes, dir.path()).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.rows[0].error.is_none());
    assert!(report.rows[1].error.is_some());
    assert!(report.rows[2].error.is_none());
    assert!(report.table().contains("failed"));

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("comparison.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);

    let err = compare_command(&scenario, &[], dir.path()).unwrap_err();
    assert_eq!(err.code, exit_code::USAGE);
}

#[test]
fn compare_covers_all_seven_benchmark_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario();
    let report = compare_command(&scenario, &scenario.schemes, dir.path()).unwrap();
    assert_eq!(report.rows.len(), 7);
    assert!(report.rows.iter().all(|r| r.error.is_none()));
    // one summary/trace pair per scheme plus the report itself
    let files = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(files, 15);
}

#[test]
fn certify_accepts_two_segment_schemes_only() {
    let scenario = short_scenario();
    let report = certify_command(&scenario, "proposed", 8).unwrap();
    assert_eq!(report.records.len(), 8);
    assert!(report.first_invalid().is_none());

    let err = certify_command(&scenario, "standard-10", 8).unwrap_err();
    assert_eq!(err.code, exit_code::USAGE);
}

#[test]
fn certify_rejects_an_empty_standstill_band() {
    let mut scenario = short_scenario();
    scenario.ci_p_y = [2.0, -2.0];
    let err = certify_command(&scenario, "proposed", 8).unwrap_err();
    assert_eq!(err.code, exit_code::VALIDATION);
    assert!(err.message.contains("ci_p_y"), "{}", err.message);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splitmpc"))
}

#[test]
fn binary_exit_codes() {
    let out = binary().args(["run", "--scheme", "warp", "--out", "/tmp"]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit_code::USAGE as i32));

    let dir = tempfile::tempdir().unwrap();
    let bad = write_scenario(dir.path(), "bad.json", r#"{"mass": 0.0}"#);
    let out = binary()
        .args(["certify", "--scheme", "proposed"])
        .arg("--scenario")
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit_code::VALIDATION as i32));

    let out = binary()
        .args(["certify", "--scheme", "proposed", "--steps", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("step")).count(), 5);

    let out = binary().args(["certify", "--scheme", "standard-10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit_code::USAGE as i32));

    let out = binary().arg("print-defaults").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let parsed: Scenario = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed, Scenario::default());
}

#[test]
fn repeated_runs_are_bit_identical_except_timing() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let scenario = Scenario {
        steps: 12,
        ..Scenario::default()
    };
    run_command(&scenario, "proposed", dir_a.path()).unwrap();
    run_command(&scenario, "proposed", dir_b.path()).unwrap();

    // the CSV must agree column-for-column once timing is masked
    let mask_csv = |path: &Path| {
        let text = fs::read_to_string(path).unwrap();
        text.lines()
            .map(|line| {
                let mut cols: Vec<&str> = line.split(',').collect();
                let last = cols.len() - 1;
                cols[last] = "t";
                cols.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        mask_csv(&dir_a.path().join("proposed_trace.csv")),
        mask_csv(&dir_b.path().join("proposed_trace.csv"))
    );

    let mask_summary = |path: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        v["median_solve_ms"] = 0.into();
        v
    };
    assert_eq!(
        mask_summary(&dir_a.path().join("proposed_summary.json")),
        mask_summary(&dir_b.path().join("proposed_summary.json"))
    );
}

#[test]
fn scenario_round_trips_through_the_config_format() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = Scenario {
        steps: 17,
        coarse_steps: 6,
        ..Scenario::default()
    };
    scenario.obstacles[0].cx = 9.5;
    let path = write_scenario(
        dir.path(),
        "roundtrip.json",
        &serde_json::to_string_pretty(&scenario).unwrap(),
    );
    let back = parse_scenario(&path).unwrap();
    assert_eq!(scenario, back);
}
