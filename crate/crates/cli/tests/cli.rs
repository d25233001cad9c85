//! End-to-end tests of the `bellaudit` binary: exit codes, file outputs,
//! golden formats, and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace_path(relative: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(relative)
}

fn bellaudit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellaudit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

fn finding_codes(report: &serde_json::Value) -> Vec<String> {
    report["findings"]
        .as_array()
        .expect("findings array")
        .iter()
        .map(|f| f["code"].as_str().expect("code string").to_string())
        .collect()
}

#[test]
fn audit_flags_the_single_setting_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace_path("configs/salart_like.json");
    let out = bellaudit(dir.path(), &["audit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let report = stdout_json(&out);
    let codes = finding_codes(&report);
    assert!(codes.contains(&"SINGLE_SETTING_NO_BELL_TEST".to_string()));
    assert!(codes.contains(&"POSTSELECTION_PRESENT_CHSH_INVALID".to_string()));
    assert!(!codes.contains(&"OK".to_string()));
    assert_eq!(report["seed"], 42);

    // The outcome-outcome pair is spacelike; faster-than-light influence
    // would be needed to connect the two detections.
    let pair = report["pair_classifications"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["event_1"] == "outcome_east" && p["event_2"] == "outcome_west")
        .expect("outcome pair present");
    assert_eq!(pair["class"], "spacelike");
    let speed = pair["min_influence_speed"].as_f64().unwrap();
    assert!((speed / 1.20084e4 - 1.0).abs() < 1e-4, "speed {speed}");

    // The report is also written to the config's output path.
    assert!(dir.path().join("salart_like_audit.json").is_file());
}

#[test]
fn audit_passes_the_compliant_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace_path("configs/loophole_aware.json");
    let out = bellaudit(dir.path(), &["audit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(finding_codes(&stdout_json(&out)), vec!["OK".to_string()]);
}

#[test]
fn audit_rejects_a_missing_station_reference() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.json");
    std::fs::write(
        &config_path,
        r#"{
          "seed": 1,
          "experiment": {
            "stations": [{"name": "lab", "position_m": [0.0, 0.0, 0.0]}],
            "events": [
              {"label": "e", "kind": "emission", "side": "source", "station": "ghost", "time_s": 0.0}
            ],
            "settings_count_a": 2,
            "settings_count_b": 2
          }
        }"#,
    )
    .unwrap();
    let out = bellaudit(
        dir.path(),
        &["audit", "--config", config_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ghost"), "stderr: {stderr}");
}

#[test]
fn audit_rejects_unknown_config_keys_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("typo.json");
    std::fs::write(&config_path, r#"{"seed": 1, "experimnt": {}}"#).unwrap();
    let out = bellaudit(
        dir.path(),
        &["audit", "--config", config_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("experimnt") && stderr.contains("line"),
        "stderr: {stderr}"
    );
}

#[test]
fn audit_requires_an_experiment_section() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace_path("crates/cli/tests/fixtures/small.json");
    let out = bellaudit(dir.path(), &["audit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_reproduces_the_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace_path("crates/cli/tests/fixtures/small.json");
    let out = bellaudit(
        dir.path(),
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--csv",
            "fringe.csv",
            "--summary",
            "summary.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let fringe = std::fs::read(dir.path().join("fringe.csv")).unwrap();
    let summary = std::fs::read(dir.path().join("summary.json")).unwrap();
    let golden_fringe =
        std::fs::read(workspace_path("crates/cli/tests/golden/small_fringe.csv")).unwrap();
    let golden_summary =
        std::fs::read(workspace_path("crates/cli/tests/golden/small_summary.json")).unwrap();
    assert_eq!(
        fringe, golden_fringe,
        "fringe CSV drifted from the golden file"
    );
    assert_eq!(
        String::from_utf8(summary).unwrap().trim_end(),
        String::from_utf8(golden_summary).unwrap().trim_end(),
        "summary JSON drifted from the golden file"
    );
}

#[test]
fn simulate_32_phase_scan_writes_32_monotone_rows() {
    let dir = tempfile::tempdir().unwrap();
    let phases: Vec<f64> = (0..32).map(|i| i as f64 * 360.0 / 32.0).collect();
    let config = serde_json::json!({
        "seed": 5,
        "franson": {
            "delta_t_s": 1.2e-9,
            "phases_a_deg": phases,
            "phases_b_rad": [0.0],
            "visibility": 0.9,
            "n_pairs": 20000
        }
    });
    let config_path = dir.path().join("scan.json");
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = bellaudit(
        dir.path(),
        &[
            "simulate",
            "--config",
            config_path.to_str().unwrap(),
            "--csv",
            "scan.csv",
            "--summary",
            "scan_summary.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "phase_a_rad,n_kept,n_equal,n_unequal,e_hat");
    assert_eq!(lines.len(), 33, "header plus one row per scanned phase");
    let mut last = f64::NEG_INFINITY;
    for line in &lines[1..] {
        let phase: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(phase > last, "phase column is not monotone at {phase}");
        last = phase;
    }
}

#[test]
fn simulate_is_byte_identical_across_worker_counts() {
    let config = workspace_path("crates/cli/tests/fixtures/small.json");
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_bellaudit"))
            .args([
                "simulate",
                "--config",
                config.to_str().unwrap(),
                "--csv",
                "f.csv",
                "--summary",
                "s.json",
            ])
            .env("BELLAUDIT_WORKERS", workers)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        outputs.push((
            std::fs::read(dir.path().join("f.csv")).unwrap(),
            std::fs::read(dir.path().join("s.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn simulate_seed_override_is_recorded_and_changes_the_stream() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace_path("crates/cli/tests/fixtures/small.json");
    let out = bellaudit(
        dir.path(),
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--csv",
            "f.csv",
            "--summary",
            "s.json",
            "--seed",
            "8",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 8);
    let golden =
        std::fs::read(workspace_path("crates/cli/tests/golden/small_summary.json")).unwrap();
    assert_ne!(std::fs::read(dir.path().join("s.json")).unwrap(), golden);
}

#[test]
fn bounds_chained_3_matches_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellaudit(dir.path(), &["bounds", "--chained", "3", "--out", "b.json"]);
    assert_eq!(out.status.code(), Some(0));
    let written = std::fs::read_to_string(dir.path().join("b.json")).unwrap();
    let golden = std::fs::read_to_string(workspace_path(
        "crates/cli/tests/golden/bounds_chained3.json",
    ))
    .unwrap();
    assert_eq!(written.trim_end(), golden.trim_end());
}

#[test]
fn bounds_over_the_enumeration_cap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellaudit(dir.path(), &["bounds", "--chained", "10"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bounds_cap_can_be_raised_by_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bellaudit"))
        .args(["bounds", "--chained", "10"])
        .env("BELLAUDIT_ENUM_CAP", "2000000")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["local_bound"], 18.0);
}

#[test]
fn bounds_without_an_expression_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellaudit(dir.path(), &["bounds"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn postselected_chsh_bound_report_has_a_two_strategy_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellaudit(
        dir.path(),
        &["bounds", "--chsh", "--postselected", "setting-dependent"],
    );
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let ps = &report["postselected"];
    assert_eq!(ps["class"], "setting_dependent_path");
    assert!((ps["bound"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    let witness = ps["witness"].as_array().unwrap();
    assert_eq!(witness.len(), 2);
    for component in witness {
        assert!((component["weight"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    }
}

fn write_pr_box(path: &Path) {
    let mut probs = vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    if (a ^ b) == (x & y) {
                        probs[x][y][a][b] = 0.5;
                    }
                }
            }
        }
    }
    let file = serde_json::json!({
        "settings_a": 2, "settings_b": 2, "outcomes_a": 2, "outcomes_b": 2,
        "probs": probs,
    });
    std::fs::write(path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
}

#[test]
fn lhv_fit_returns_a_self_checking_certificate_for_the_pr_box() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("pr_box.json");
    write_pr_box(&table_path);
    let out = bellaudit(
        dir.path(),
        &["lhv-fit", "--table", table_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["result"], "infeasible");
    let cert = &report["certificate"];
    let value = cert["value_on_table"].as_f64().unwrap();
    let threshold = cert["threshold"].as_f64().unwrap();
    let max_strategies = cert["max_over_strategies"].as_f64().unwrap();
    assert!(value > threshold + 1e-6);
    assert!(max_strategies <= threshold + 1e-9);
}

#[test]
fn lhv_fit_builds_a_model_for_a_single_setting_table() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("fringe_table.json");
    let phases = [0.0f64, 1.3, 2.6, 3.9];
    let probs: Vec<Vec<Vec<Vec<f64>>>> = phases
        .iter()
        .map(|phi| {
            let e = 0.9 * phi.cos();
            vec![vec![
                vec![(1.0 + e) / 4.0, (1.0 - e) / 4.0],
                vec![(1.0 - e) / 4.0, (1.0 + e) / 4.0],
            ]]
        })
        .collect();
    let file = serde_json::json!({
        "settings_a": 4, "settings_b": 1, "outcomes_a": 2, "outcomes_b": 2,
        "probs": probs,
    });
    std::fs::write(&table_path, serde_json::to_string(&file).unwrap()).unwrap();
    let out = bellaudit(
        dir.path(),
        &[
            "lhv-fit",
            "--table",
            table_path.to_str().unwrap(),
            "--out",
            "model.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["result"], "model");
    assert_eq!(report["method"], "single_setting_construction");
    assert!(report["reprediction_error"].as_f64().unwrap() < 1e-12);
    assert!(dir.path().join("model.json").is_file());
}

#[test]
fn lhv_fit_dispatches_multi_setting_tables_to_the_polytope_test() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("local.json");
    // A two-setting product table: P(a,b|x,y) = 1/4 everywhere is local.
    let file = serde_json::json!({
        "settings_a": 2, "settings_b": 2, "outcomes_a": 2, "outcomes_b": 2,
        "probs": vec![vec![vec![vec![0.25; 2]; 2]; 2]; 2],
    });
    std::fs::write(&table_path, serde_json::to_string(&file).unwrap()).unwrap();
    let out = bellaudit(
        dir.path(),
        &["lhv-fit", "--table", table_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["result"], "model");
    assert_eq!(report["method"], "lp_membership");
    assert!(report["reprediction_error"].as_f64().unwrap() < 1e-7);
}

#[test]
fn lhv_fit_rejects_a_malformed_table() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("broken.json");
    std::fs::write(&table_path, "{\"settings_a\": 2").unwrap();
    let out = bellaudit(
        dir.path(),
        &["lhv-fit", "--table", table_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
}
