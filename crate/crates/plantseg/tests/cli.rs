//! End-to-end subcommand checks against the compiled binary.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plantseg"))
}

const SCENE: &str = r#"
seed = 21
noise_sigma = 0.0

[[objects]]
center = [0.5, 0.5, 0.0]
yaw = 0.0
density = 6000.0

[objects.shape]
kind = "cylinder"
radius = 0.08
length = 1.0

[[objects]]
center = [3.0, 1.0, 0.0]
yaw = 0.5
density = 5000.0

[objects.shape]
kind = "i_beam"
depth = 0.3
flange = 0.15
length = 1.2
"#;

#[test]
fn synth_segment_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    fs::write(&scene, SCENE).unwrap();
    let gt = dir.path().join("gt.xyz");
    let seg = dir.path().join("seg.xyz");
    let report = dir.path().join("report.json");

    let status = bin()
        .args(["synth", "--spec"])
        .arg(&scene)
        .arg("--out")
        .arg(&gt)
        .status()
        .unwrap();
    assert!(status.success());

    let status = bin()
        .args(["segment", "--input"])
        .arg(&gt)
        .arg("--out")
        .arg(&seg)
        .status()
        .unwrap();
    assert!(status.success());

    let status = bin()
        .args(["evaluate", "--gt"])
        .arg(&gt)
        .arg("--pred")
        .arg(&seg)
        .args(["--iou", "0.5", "--out"])
        .arg(&report)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&report).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["kind"], "evaluation");
    assert_eq!(doc["body"]["mean_precision"], 1.0);
    assert_eq!(doc["body"]["mean_recall"], 1.0);
}

#[test]
fn evaluate_sweep_prints_curve() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    fs::write(&scene, SCENE).unwrap();
    let gt = dir.path().join("gt.xyz");
    let seg = dir.path().join("seg.xyz");
    assert!(bin().args(["synth", "--spec"]).arg(&scene).arg("--out").arg(&gt).status().unwrap().success());
    assert!(bin().args(["segment", "--input"]).arg(&gt).arg("--out").arg(&seg).status().unwrap().success());
    let out = bin()
        .args(["evaluate", "--gt"])
        .arg(&gt)
        .arg("--pred")
        .arg(&seg)
        .args(["--sweep", "0.25:0.75:0.25"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["kind"], "pr-sweep");
    assert_eq!(doc["body"].as_array().unwrap().len(), 3);
}

#[test]
fn cost_report_from_stats_file() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    fs::write(
        &stats,
        r#"{
            "name": "demo",
            "classes": [
                { "class": "Cylinder", "total_shapes": 100, "recall": 0.4 },
                { "class": "Valve", "total_shapes": 50, "recall": 0.2 }
            ],
            "per_shape_minutes": null,
            "total_hours": null
        }"#,
    )
    .unwrap();
    let out = bin()
        .args(["cost-report", "--stats"])
        .arg(&stats)
        .args(["--rate-minutes", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["body"]["total_manual_shapes"], 100); // 60 + 40
    assert_eq!(doc["body"]["framework_hours"], 5.0);
}

#[test]
fn missing_input_fails_with_path_in_message() {
    let out = bin()
        .args(["synth", "--spec", "/nonexistent/scene.toml", "--out", "/tmp/x.xyz"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/scene.toml"), "{stderr}");
}

#[test]
fn run_subcommand_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    fs::write(&scene, SCENE).unwrap();
    let config = dir.path().join("pipeline.toml");
    fs::write(
        &config,
        format!(
            "seed = 7\n[input]\nscene = {:?}\n[classify]\nmode = \"passthrough\"\n",
            scene.display().to_string()
        ),
    )
    .unwrap();
    let run_dir = dir.path().join("run");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&run_dir)
        .status()
        .unwrap();
    assert!(status.success());
    for file in [
        "ground_truth.xyz",
        "classified.xyz",
        "segmented.xyz",
        "evaluation.json",
        "class_metrics.json",
        "manifest.json",
    ] {
        assert!(run_dir.join(file).exists(), "{file} missing");
    }
}

#[test]
fn boundaries_reports_touching_contact() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    // two touching cylinders
    fs::write(
        &scene,
        r#"
seed = 3

[[objects]]
center = [0.0, 0.0, 0.0]
density = 6000.0
[objects.shape]
kind = "cylinder"
radius = 0.05
length = 0.5

[[objects]]
center = [0.1, 0.0, 0.0]
density = 6000.0
[objects.shape]
kind = "cylinder"
radius = 0.05
length = 0.5
"#,
    )
    .unwrap();
    let gt = dir.path().join("gt.xyz");
    assert!(bin().args(["synth", "--spec"]).arg(&scene).arg("--out").arg(&gt).status().unwrap().success());
    let out = bin()
        .args(["boundaries", "--input"])
        .arg(&gt)
        .args(["--mode", "gt"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["body"]["count"].as_u64().unwrap() > 0);
}

#[test]
fn partition_summary_counts() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    fs::write(&scene, SCENE).unwrap();
    let gt = dir.path().join("gt.xyz");
    assert!(bin().args(["synth", "--spec"]).arg(&scene).arg("--out").arg(&gt).status().unwrap().success());
    let out = bin()
        .args(["partition", "--input"])
        .arg(&gt)
        .args(["--window-size", "10", "--block-size", "1", "--block-stride", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["body"]["windows"], 1);
    assert!(doc["body"]["blocks"].as_u64().unwrap() > 1);
}
