use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hierwalk"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hierwalk-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(p: &PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generate_then_spectrum_and_walk() {
    let dir = scratch("gen");
    let spec = dir.join("line.json");
    ok(&["generate", "line", "--n", "4", "--D", "30", "--factors", "6,10,15", "--seed", "2", "--out", spec.to_str().unwrap()]);
    let summary = dir.join("summary.json");
    ok(&["spectrum", "--in", spec.to_str().unwrap(), "--out", summary.to_str().unwrap()]);
    let s = read(&summary);
    assert_eq!(s["zero_count"], 1);
    assert_eq!(s["eigenvalues"].as_array().unwrap().len(), 9);

    let rec = dir.join("walk.json");
    ok(&["walk", "--in", spec.to_str().unwrap(), "--trials", "50", "--seed", "1", "--out", rec.to_str().unwrap()]);
    let w = read(&rec);
    assert_eq!(w["holds"], true);
    assert!(w["success_rate"].as_f64().is_some());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn welded_classical_and_mc_walk() {
    let dir = scratch("welded");
    let spec = dir.join("w.json");
    ok(&["generate", "welded", "--n", "4", "--out", spec.to_str().unwrap()]);
    let out: Value = serde_json::from_str(&ok(&["classical", "--in", spec.to_str().unwrap(), "--Q", "160", "--trials", "20"])).unwrap();
    assert_eq!(out["vertices"], 30);
    let rate = out["result"]["rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    let mc: Value = serde_json::from_str(&ok(&["walk", "--in", spec.to_str().unwrap(), "--mode", "mc", "--trials", "100"])).unwrap();
    assert_eq!(mc["mode"], "mc");
    assert!(mc["p_bar"].as_f64().unwrap() > 0.0);
    assert!(!run(&["walk", "--in", spec.to_str().unwrap(), "--mode", "mc"]).status.success());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn lieb_generation_modes() {
    let dir = scratch("lieb");
    for fluct in ["none", "ice", "bgff"] {
        let p = dir.join(format!("{fluct}.json"));
        ok(&["generate", "lieb", "--N", "3", "--D", "30", "--f", "10", "--fluct", fluct, "--out", p.to_str().unwrap()]);
        let s: Value = serde_json::from_str(&ok(&["spectrum", "--in", p.to_str().unwrap()])).unwrap();
        assert_eq!(s["zero_count"], 5, "{fluct}");
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn sparsify_writes_a_graph() {
    let dir = scratch("sparsify");
    let t = dir.join("t.json");
    std::fs::write(&t, "[[0, 1, 0], [1, 0, 1], [0, 1, 0]]").unwrap();
    for method in ["poisson", "bvn"] {
        let g = dir.join(format!("{method}.json"));
        let stdout = ok(&["sparsify", "--t", t.to_str().unwrap(), "--N", "300", "--D", "4", "--method", method, "--out", g.to_str().unwrap()]);
        let summary: Value = serde_json::from_str(&stdout).unwrap();
        assert!(summary["distance"].as_f64().unwrap() > 0.0);
        let doc = read(&g);
        assert_eq!(doc["materialized"]["n"], 300);
        assert!(doc["scale"].as_f64().unwrap() > 0.0);
    }
    std::fs::write(&t, "[[0, 1], [1]]").unwrap();
    assert!(!run(&["sparsify", "--t", t.to_str().unwrap(), "--N", "10", "--D", "2"]).status.success());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn experiment_exit_codes_and_reproducible_csv() {
    let dir = scratch("exp");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "scaling_2d", "seeds": [0]}"#).unwrap();
    assert_eq!(run(&["experiment", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(run(&["experiment", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    let out = dir.join("lieb");
    let text = serde_json::json!({
        "experiment": "lieb_2d",
        "grid": {"N": [3, 4], "fluct": ["none"]},
        "seeds": [0],
        "out": out,
    });
    std::fs::write(&cfg, text.to_string()).unwrap();
    ok(&["experiment", "--config", cfg.to_str().unwrap(), "--jobs", "2"]);
    let first = std::fs::read(out.with_extension("csv")).unwrap();
    ok(&["experiment", "--config", cfg.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(first, std::fs::read(out.with_extension("csv")).unwrap());
    assert!(String::from_utf8(first).unwrap().starts_with("# hierwalk-record-v1\n"));
    let records = read(&out.with_extension("json"));
    assert_eq!(records.as_array().unwrap().len(), 2);

    // a cap too small for the instances fails the records and the exit code
    let capped = bin()
        .args(["experiment", "--config", cfg.to_str().unwrap()])
        .env("HIERWALK_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(1));
    std::fs::remove_dir_all(dir).unwrap();
}
