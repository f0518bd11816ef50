use super::*;
use serde_json::json;

fn config(v: Value) -> ExperimentConfig {
    ExperimentConfig::parse(&v.to_string()).unwrap()
}

fn unknown(text: &str) -> bool {
    matches!(ExperimentConfig::parse(text), Err(ExperimentError::UnknownExperiment(_)))
}

#[test]
fn malformed_configs_are_unknown_experiments() {
    assert!(unknown("not json"));
    assert!(unknown(r#"{"seeds": [1]}"#));
    assert!(unknown(r#"{"experiment": 3, "seeds": [1]}"#));
    assert!(unknown(r#"{"experiment": "scaling_2d", "seeds": [1]}"#));
    assert!(matches!(
        ExperimentConfig::parse(r#"{"experiment": "lieb_2d", "seeds": []}"#),
        Err(ExperimentError::Config(_))
    ));
    let bad_grid = config(json!({"experiment": "lieb_2d", "seeds": [0], "grid": {"typo": 1}}));
    assert!(matches!(run_experiment(&bad_grid, 1), Err(ExperimentError::Config(_))));
}

#[test]
fn caps_only_go_down() {
    let c = Caps { vertices: 5_000_000, dense_dim: 100 };
    assert_eq!(c.effective(None), Caps { vertices: MAX_VERTICES, dense_dim: 100 });
    assert_eq!(c.effective(Some("5000")), Caps { vertices: 5000, dense_dim: 100 });
    assert_eq!(c.effective(Some("1e9")), Caps { vertices: MAX_VERTICES, dense_dim: 100 });
    assert_eq!(c.effective(Some("junk")), c.effective(None));
    let parsed = config(json!({"experiment": "lieb_highd", "seeds": [0], "caps": {"dense_dim": 10}}));
    assert_eq!(parsed.caps, Caps { vertices: MAX_VERTICES, dense_dim: 10 });
}

#[test]
fn record_round_trips() {
    let mut r = ExperimentRecord::new("x").param("n", 3).param("fluct", "ice");
    for (k, v) in [("a", 0.1 + 0.2), ("b", 1e-300), ("c", std::f64::consts::PI), ("d", -2.5e17), ("e", 5e-324)] {
        r.put(k, v);
    }
    r.put("inf", f64::INFINITY);
    r.wall_time = 0.123456789;
    assert!(r.note.as_deref().unwrap().contains("inf"));
    assert!(!r.measured.contains_key("inf"));
    let text = serde_json::to_string(&vec![r.clone()]).unwrap();
    assert_eq!(records_from_json(&text).unwrap(), vec![r.clone()]);

    let csv_text = to_csv(std::slice::from_ref(&r)).unwrap();
    let mut lines = csv_text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let body = lines.collect::<Vec<_>>().join("\n");
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let header = rd.headers().unwrap().clone();
    let row = rd.records().next().unwrap().unwrap();
    for (k, v) in &r.measured {
        let i = header.iter().position(|h| h == k).unwrap();
        assert_eq!(row[i].parse::<f64>().unwrap(), *v, "{k}");
    }
    assert_eq!(&row[header.iter().position(|h| h == "fluct").unwrap()], "ice");
}

#[test]
fn linear_fit_exact_line() {
    let f = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
    assert!((f.r2 - 1.0).abs() < 1e-12 && f.slope_se.abs() < 1e-6);
    assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    assert_eq!(median(&[3.0, 1.0, 2.0, 4.0]), 3.0);
}

fn small(experiment: &str, grid: Value, seeds: &[u64]) -> ExperimentConfig {
    config(json!({"experiment": experiment, "grid": grid, "seeds": seeds}))
}

/// Runs twice with different pool sizes: same CSV bytes, JSON round trip.
fn reproducible(cfg: &ExperimentConfig) -> RunReport {
    let a = run_experiment(cfg, 1).unwrap();
    let b = run_experiment(cfg, 3).unwrap();
    let text = to_csv(&a.records).unwrap();
    assert_eq!(text, to_csv(&b.records).unwrap(), "{}", cfg.experiment);
    assert!(text.starts_with(CSV_HEADER));
    let json_text = serde_json::to_string(&a.records).unwrap();
    assert_eq!(records_from_json(&json_text).unwrap(), a.records);
    a
}

#[test]
fn scaling_1d_small() {
    let rep = reproducible(&small("scaling_1d", json!({"n": [5, 7, 9]}), &[0, 1]));
    assert_eq!(rep.records.len(), 7);
    assert!(rep.records[..6].iter().all(|r| r.passed && r.get("p_bar").is_some()));
    assert!(rep.records[6].get("r2_sqrt_p").is_some());
    let header = to_csv(&rep.records).unwrap().lines().nth(1).unwrap().to_string();
    for col in ["n", "seed", "gap", "overlap", "log_inv_p"] {
        assert!(header.split(',').any(|h| h == col), "{col}");
    }
}

#[test]
fn lieb_experiments_small() {
    let rep = reproducible(&small("lieb_2d", json!({"N": [3], "fluct": ["none", "ice"]}), &[0]));
    assert_eq!(rep.records.len(), 2);
    assert!(rep.all_passed, "{:?}", rep.records);
    let rep = reproducible(&small("lieb_highd", Value::Null, &[0]));
    assert_eq!(rep.records[0].get("zero_count"), Some(29.0));
    assert!(rep.all_passed, "{:?}", rep.records);
}

#[test]
fn sparsified_welded_small() {
    let grid = json!({"n": 3, "vertices": 120, "degrees": [4], "methods": ["poisson", "bvn"]});
    let rep = reproducible(&small("sparsified_welded", grid, &[0]));
    assert_eq!(rep.records.len(), 3);
    assert!(rep.records[0].get("target").is_some());
    assert!(rep.records[2].get("remaining_doubles").is_some());
}

#[test]
fn anderson_diag_small() {
    let grid = json!({"n": [6, 8, 10], "length": 2000, "lyapunov_trials": 4});
    let rep = reproducible(&small("anderson_diag", grid, &[0, 1]));
    // six points, Lyapunov, fit, two shift checks
    assert_eq!(rep.records.len(), 10);
    assert!(rep.records.iter().filter(|r| r.params.get("stage") == Some(&json!("shift"))).all(|r| r.passed));
}

#[test]
fn classical_vs_quantum_small() {
    let rep = reproducible(&small("classical_vs_quantum", json!({"n": [3, 4], "trials": 40}), &[0]));
    assert_eq!(rep.records.len(), 3);
    assert!(rep.records[0].get("classical_rate").is_some() && rep.records[0].get("p_bar").is_some());
}

#[test]
fn dos_dyson_small() {
    let grid = json!({"half_length": 10, "sites": 20, "trials": 30, "eps_log": [1, 3], "reference_eps_log": 1});
    let rep = reproducible(&small("dos_dyson", grid, &[0]));
    assert_eq!(rep.records.len(), 4);
    assert!(rep.records[0].get("sigma2").unwrap() > 0.0);
}

#[test]
fn caps_are_enforced_per_record() {
    let mut cfg = small("lieb_highd", Value::Null, &[0]);
    cfg.caps.dense_dim = 10;
    let rep = run_experiment(&cfg, 1).unwrap();
    assert!(!rep.all_passed);
    assert!(rep.records[0].note.as_deref().unwrap().contains("cap"));
}

#[test]
fn writes_csv_and_json() {
    let dir = std::env::temp_dir().join(format!("hierwalk-exp-{}", std::process::id()));
    let mut cfg = small("lieb_highd", Value::Null, &[0]);
    cfg.out = Some(dir.join("run.csv"));
    let rep = run_experiment(&cfg, 1).unwrap();
    let csv_text = std::fs::read_to_string(rep.csv_path.unwrap()).unwrap();
    assert_eq!(csv_text, to_csv(&rep.records).unwrap());
    let back = records_from_json(&std::fs::read_to_string(rep.json_path.unwrap()).unwrap()).unwrap();
    assert_eq!(back, rep.records);
    std::fs::remove_dir_all(dir).unwrap();
}
