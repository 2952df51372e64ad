use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sargdv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sargdv"))
        .args(args)
        .env("SARGDV_LOG", "error")
        .output()
        .expect("binary runs")
}

fn small_dataset(dir: &Path) -> String {
    let spec = dir.join("spec.json");
    fs::write(
        &spec,
        r#"{"width": 40, "height": 36, "blob_count": 3, "blob_radius_min": 3, "blob_radius_max": 5, "confuser_count": 2}"#,
    )
    .unwrap();
    let data = dir.join("data");
    let out = sargdv(&["synth", "--spec", spec.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = data.join("config.json");
    let mut c: Value = serde_json::from_str(&fs::read_to_string(&config).unwrap()).unwrap();
    c["gbt"]["rounds"] = 4.into();
    c["gbt"]["max_depth"] = 5.into();
    fs::write(&config, c.to_string()).unwrap();
    config.to_str().unwrap().to_string()
}

#[test]
fn stages_compose_to_run_all() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_dataset(dir.path());
    let all = dir.path().join("all");
    let out = sargdv(&["--config", &config, "--out", all.to_str().unwrap(), "run-all"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let staged = dir.path().join("staged");
    for stage in ["ingest", "rasterize", "split", "sample", "train", "predict", "smooth", "eval", "curves", "idw"] {
        let out = sargdv(&["--config", &config, "--out", staged.to_str().unwrap(), stage]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for artifact in ["metrics.json", "dtw.json", "gbt_model.json", "roc_logreg.csv"] {
        assert_eq!(
            fs::read(all.join(artifact)).unwrap(),
            fs::read(staged.join(artifact)).unwrap(),
            "{artifact}"
        );
    }
    let prov: Value = serde_json::from_str(&fs::read_to_string(staged.join("metrics.json.prov.json")).unwrap()).unwrap();
    assert_eq!(prov["stage"], "eval");
    assert_eq!(prov["schema_version"], 1);
    assert!(prov["inputs"].as_array().unwrap().iter().all(|i| i["sha256"].as_str().unwrap().len() == 64));
    assert!(staged.join("ingest.json").exists());
}

#[test]
fn seed_flag_changes_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_dataset(dir.path());
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        for stage in ["rasterize", "split", "sample"] {
            let o = sargdv(&["--config", &config, "--seed", seed, "--out", out.to_str().unwrap(), stage]);
            assert!(o.status.success());
        }
        fs::read(out.join("samples.csv")).unwrap()
    };
    assert_eq!(run("3", "a"), run("3", "b"));
    assert_ne!(run("3", "a"), run("4", "c"));
}

#[test]
fn missing_stage_input_exits_1_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_dataset(dir.path());
    let out = sargdv(&["--config", &config, "--out", dir.path().join("empty").to_str().unwrap(), "predict"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gbt_model.json"));

    let out = sargdv(&["--config", dir.path().join("absent.json").to_str().unwrap(), "split"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(sargdv(&["no-such-stage"]).status.code(), Some(1));
    assert_eq!(sargdv(&["--threads", "x", "split"]).status.code(), Some(1));
    assert_eq!(sargdv(&["--threads", "0", "split"]).status.code(), Some(1));
    assert_eq!(sargdv(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_of_truth_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let truth = dir.path().join("data/truth.json");
    let out_dir = dir.path().join("eval");
    let out = sargdv(&[
        "eval",
        "--pred",
        truth.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["confusion"][0]["metrics"]["accuracy"], 1.0);
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"thresholds": [0.9, 1.5]}"#).unwrap();
    let out = sargdv(&["--config", config.to_str().unwrap(), "split"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thresholds"));
}

#[test]
fn idw_cutoff_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_dataset(dir.path());
    let out = dir.path().join("idw");
    let o = sargdv(&["--config", &config, "--out", out.to_str().unwrap(), "idw", "--cutoff", "2015-01-01"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("idw_report.json")).unwrap()).unwrap();
    assert_eq!(rep["filter"]["kept"], 46);
    assert_eq!(rep["cutoff_date"], "2015-01-01");
    let o = sargdv(&["--config", &config, "idw", "--cutoff", "2019-13-01"]);
    assert_eq!(o.status.code(), Some(1));
}
