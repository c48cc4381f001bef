use std::path::Path;
use std::process::{Command, Output};

use sceneparse::harness::{tower, ExperimentConfig};

fn sceneparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sceneparse")).args(args).output().expect("binary runs")
}

fn tiny_config(dir: &Path) -> String {
    let cfg = ExperimentConfig { name: "tiny".into(), script: tower(2, 2), k: 2, repeats: 1, ..ExperimentConfig::default() };
    let path = dir.join("tiny.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn dump_defaults_is_a_loadable_config() {
    let out = sceneparse(&["dump-defaults"]);
    assert!(out.status.success());
    let cfg: ExperimentConfig = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn errors_exit_nonzero_with_diagnostic() {
    let out = sceneparse(&["experiment", "--config", "/nonexistent/config.json", "--out", "/tmp/unused"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("/nonexistent/config.json"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"k": 0}"#).unwrap();
    let out = sceneparse(&["oracle", "--config", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid parameter"));

    assert!(!sceneparse(&["experiment", "--format", "xml", "--out", "x"]).status.success());
}

#[test]
fn gen_scene_then_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let scene = dir.path().join("scene");
    let out = sceneparse(&["gen-scene", "--config", &cfg, "--seed", "3", "--out", scene.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cloud = std::fs::read_to_string(scene.join("frame_0000.xyz")).unwrap();
    assert!(cloud.lines().all(|l| l.split_whitespace().count() == 4), "ground-truth clouds carry labels");

    let est = dir.path().join("est");
    let out = sceneparse(&["parse", "--input", scene.to_str().unwrap(), "--out", est.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for frame in 0..2 {
        let text = std::fs::read_to_string(est.join(format!("frame_{frame:04}_estimate.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["frame"], frame);
        assert_eq!(v["objects"].as_array().map(Vec::len), Some(2), "{text}");
    }
}

#[test]
fn oracle_reports_both_searches() {
    let out = sceneparse(&["oracle", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["greedy"]["log_prob"].as_f64().unwrap() <= v["oracle"]["log_prob"].as_f64().unwrap() + 1e-12);
    assert_eq!(v["search_size"], 9);
}
