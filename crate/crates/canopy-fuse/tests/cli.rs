//! End-to-end checks of the installed binary: exit codes, artifacts on
//! disk, and machine-readable stdout.

use std::path::Path;
use std::process::{Command, Output};

use canopy_fuse::eval::EvalReport;
use canopy_fuse::pipeline::RunSummary;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_canopy-fuse"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary spawns");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_default_config(path: &Path) {
    let cfg = canopy_fuse::config::PipelineConfig::default();
    std::fs::write(path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

#[test]
fn synth_run_eval_ablate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let config = dir.path().join("config.json");
    write_default_config(&config);

    let out = run_ok(bin().args([
        "synth",
        "--seed",
        "11",
        "--out",
        scene.to_str().unwrap(),
        "--regions",
        "2",
        "--months",
        "4",
        "--size",
        "16",
    ]));
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.contains("imagery"), "unexpected synth summary: {line}");
    let manifest = scene.join("manifest.json");
    assert!(manifest.is_file());
    assert!(scene.join("truth.json").is_file());

    let pred = dir.path().join("pred");
    let out = run_ok(bin().args([
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        pred.to_str().unwrap(),
    ]));
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.contains("queries 8"), "unexpected run summary: {line}");
    let summary: RunSummary =
        serde_json::from_str(&std::fs::read_to_string(pred.join("run_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary.queries, 8);
    assert_eq!(summary.predictions_written, 8);
    let masks = std::fs::read_dir(&pred)
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name();
            name.to_str().unwrap().starts_with("pred_")
        })
        .count();
    assert_eq!(masks, 8);

    let out = run_ok(bin().args([
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--gt",
        manifest.to_str().unwrap(),
        "--per-query",
    ]));
    let report: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.queries, 8);
    assert_eq!(report.missing_predictions, 0);
    assert!(report.overall.pixel_accuracy > 0.9);
    assert_eq!(report.per_query.as_ref().map(Vec::len), Some(8));

    let ablation = dir.path().join("ablation");
    let out = run_ok(bin().args([
        "ablate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        ablation.to_str().unwrap(),
    ]));
    let table = String::from_utf8(out.stdout).unwrap();
    for name in ["baseline", "screened", "screened_windowed"] {
        assert!(table.contains(name), "missing row {name} in:\n{table}");
    }
    assert!(ablation.join("ablation.json").is_file());
}

#[test]
fn worker_override_flag_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let config = dir.path().join("config.json");
    write_default_config(&config);
    run_ok(bin().args([
        "synth",
        "--seed",
        "3",
        "--out",
        scene.to_str().unwrap(),
        "--regions",
        "1",
        "--months",
        "2",
        "--size",
        "16",
    ]));
    run_ok(bin().args([
        "run",
        "--manifest",
        scene.join("manifest.json").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("pred").to_str().unwrap(),
        "--workers",
        "4",
    ]));
}

#[test]
fn missing_manifest_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    write_default_config(&config);
    let out = bin()
        .args([
            "run",
            "--manifest",
            dir.path().join("no_such.json").to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("pred").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("no_such.json"), "stderr: {err}");
}

#[test]
fn bad_usage_exits_with_code_2() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["run", "--manifest"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    run_ok(bin().args([
        "synth",
        "--seed",
        "3",
        "--out",
        scene.to_str().unwrap(),
        "--regions",
        "1",
        "--months",
        "1",
        "--size",
        "16",
    ]));
    let config = dir.path().join("config.json");
    std::fs::write(&config, "{\"workers\": \"many\"}").unwrap();
    let out = bin()
        .args([
            "run",
            "--manifest",
            scene.join("manifest.json").to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("pred").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
