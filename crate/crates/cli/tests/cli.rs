//! End-to-end runs of the rigsync binary: every subcommand, the JSON
//! contract on stdout and the documented exit codes.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rigsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigsync"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

#[test]
fn simulate_then_evaluate_and_extract() {
    let dir = tempfile::tempdir().unwrap();
    let bundle_dir = dir.path().join("session");
    let bundle_str = bundle_dir.to_str().unwrap();

    let out = rigsync(&[
        "simulate",
        "--seed",
        "7",
        "--duration-s",
        "0.6",
        "--extra-phase-ns",
        "4000000",
        "--out",
        bundle_str,
    ]);
    let summary = json_stdout(&out);
    assert!(summary["frames_rendered"].as_u64().unwrap() >= 16);
    assert!(bundle_dir.join("manifest.json").exists());
    assert!(bundle_dir.join("triggers.csv").exists());

    // offset between the two recorded IMU streams
    let mcu = bundle_dir.join("mcu_imu.csv");
    let phone = bundle_dir.join("phone_imu.csv");
    let out = rigsync(&[
        "sync",
        "offset",
        "--imu-a",
        mcu.to_str().unwrap(),
        "--imu-b",
        phone.to_str().unwrap(),
    ]);
    let estimate = json_stdout(&out);
    assert!(estimate["peak_correlation"].as_f64().unwrap() > 0.9);
    assert!(estimate["offset_ns"].as_f64().unwrap().abs() < 200_000.0);

    // drift over the same bundle, with the plot-data CSV
    let csv = dir.path().join("drift.csv");
    let out = rigsync(&[
        "eval",
        "drift",
        "--bundle",
        bundle_str,
        "--strobe",
        "3",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    let drift = json_stdout(&out);
    assert!(drift["pairs"].as_u64().unwrap() > 10);
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("frame_timestamp_ns,row_position"));

    // extraction writes the remapped copies next to the originals
    let out = rigsync(&["extract", "--bundle", bundle_str]);
    let extract = json_stdout(&out);
    assert_eq!(extract["files"].as_array().unwrap().len(), 3);
    assert!(bundle_dir.join("phone_imu.mcu.csv").exists());
    assert!(bundle_dir.join("depth_frames.mcu.csv").exists());
}

#[test]
fn precision_needs_multiple_launch_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let mut bundles = Vec::new();
    for seed in 0..4 {
        let path = dir.path().join(format!("launch_{seed}"));
        let out = rigsync(&[
            "simulate",
            "--seed",
            &seed.to_string(),
            "--duration-s",
            "0.2",
            "--extra-phase-ns",
            "4000000",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        bundles.push(path);
    }
    let args: Vec<String> = ["eval", "precision", "--frames", "6", "--strobe", "3"]
        .iter()
        .map(|s| s.to_string())
        .chain(bundles.iter().map(|p| p.to_str().unwrap().to_string()))
        .collect();
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = rigsync(&arg_refs);
    let precision = json_stdout(&out);
    assert_eq!(precision["valid_trials"].as_u64().unwrap(), 4);
    assert!(precision["report"]["sd_us"].as_f64().unwrap() >= 0.0);
}

#[test]
fn sync_phase_matches_the_worked_example() {
    let out = rigsync(&[
        "sync",
        "phase",
        "--t-s0-ns",
        "100000000",
        "--t-d0-ns",
        "95000000",
        "--period-ns",
        "33333333",
    ]);
    let phase = json_stdout(&out);
    assert_eq!(phase["phase_ns"].as_i64().unwrap(), 5_000_000);
    assert_eq!(phase["ticks"].as_i64().unwrap(), 12_821);
    assert_eq!(phase["residual_ns"].as_i64().unwrap(), -190);
}

#[test]
fn report_runs_the_whole_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    // a small config keeps the test quick
    let config = serde_json::json!({
        "seed": 3,
        "launches": 4,
        "frames_per_launch": 4,
        "drift_duration_s": 4.0,
        "session": { "extra_phase_ns": 4_000_000 }
    });
    let config_path = dir.path().join("pipeline.json");
    std::fs::write(&config_path, serde_json::to_vec(&config).unwrap()).unwrap();
    let out_dir = dir.path().join("report");
    let out = rigsync(&[
        "report",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let report = json_stdout(&out);
    assert!(report["believed_residual_ns"].as_i64().unwrap() <= 195);
    assert_eq!(report["precision"]["rows"].as_array().unwrap().len(), 4);
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn emit_default_config_round_trips() {
    let out = rigsync(&["simulate", "--emit-default-config"]);
    let cfg = json_stdout(&out);
    assert_eq!(cfg["phone"]["fps"].as_f64().unwrap(), 30.0);
    assert_eq!(cfg["phase_step_ns"].as_i64().unwrap(), 390);

    let out = rigsync(&["report", "--emit-default-config"]);
    let cfg = json_stdout(&out);
    assert_eq!(cfg["launches"].as_u64().unwrap(), 52);
    assert_eq!(cfg["drift_stride"].as_u64().unwrap(), 6);
}

#[test]
fn exit_codes_distinguish_usage_from_data_errors() {
    // bad argument: negative period -> 2
    let out = rigsync(&[
        "sync", "phase", "--t-s0-ns", "1", "--t-d0-ns", "2", "--period-ns", "-5",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // clap-level usage error -> 2
    let out = rigsync(&["sync", "phase", "--t-s0-ns", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // missing bundle -> data error -> 3
    let out = rigsync(&["eval", "drift", "--bundle", "/nonexistent/bundle"]);
    assert_eq!(out.status.code(), Some(3));

    // corrupt manifest -> data error -> 3
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("manifest.json"), b"not json").unwrap();
    let out = rigsync(&["eval", "drift", "--bundle", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn packed_format_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("packed");
    let out = rigsync(&[
        "simulate",
        "--seed",
        "9",
        "--duration-s",
        "0.2",
        "--format",
        "packed",
        "--out",
        bundle.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(bundle.join("profiles.bin").exists());
    assert!(bundle.join("profiles.json").exists());
    assert!(!Path::exists(&bundle.join("profiles")));

    // a packed bundle reads back through the eval path
    let out = rigsync(&["eval", "drift", "--bundle", bundle.to_str().unwrap()]);
    assert!(out.status.success());
}
