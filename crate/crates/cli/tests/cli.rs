use agemdp_cli::config::ExperimentConfig;
use agemdp_cli::run;
use std::path::Path;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn invoke(sub: &str, config: &Path, out: &Path) -> i32 {
    run(["agemdp", sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

const CONST2: &str = r#"{
  "model": { "type": "const2", "states": 2 },
  "grid": { "step": 0.05 },
  "alpha": 1.0
}"#;

#[test]
fn validate_rejects_a_rate_row_that_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    // Both exits from state 0 are zero for ages in [1, 2].
    let cfg = write(
        dir.path(),
        "gap.json",
        r#"{
  "model": {
    "type": "table", "states": 2,
    "rates": { "table": { "knots": [0.0, 1.0, 2.0, 3.0], "entries": [
      { "from": 0, "to": 1, "values": [[1.0, 0.0, 0.0, 1.0]] },
      { "from": 1, "to": 0, "values": [[1.0, 1.0, 1.0, 1.0]] } ] } },
    "cost": { "table": { "knots": [0.0], "values": [[[0.0]], [[1.0]]] } }
  },
  "grid": { "y_max": 5.0, "n_nodes": 51 }
}"#,
    );
    assert_eq!(invoke("validate", &cfg, dir.path()), 2);

    let m = ExperimentConfig::load(&cfg).unwrap().build_model().unwrap();
    let ages: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
    let report = agemdp::model::validate_model(&m, &ages, agemdp::model::A6Mode::Skip);
    let a2: Vec<_> = report.violations.iter().filter(|v| v.assumption == agemdp::model::Assumption::A2).collect();
    assert_eq!(a2.len(), 1);
    assert_eq!(a2[0].location.state, 0);
    let y = a2[0].location.age.unwrap();
    assert!((1.0..=2.0).contains(&y));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"model\": { \"type\": \"const2\", \"states\": 2 },\n  \"alpah\": 1.0\n}");
    assert_eq!(invoke("solve-discounted", &cfg, dir.path()), 2);
    let err = ExperimentConfig::load(&cfg).unwrap_err();
    assert_eq!(err.line.map(|l| l.0), Some(3));
    assert!(err.to_string().contains("bad.json:3:"), "{err}");

    let cfg = write(dir.path(), "neg.json", r#"{ "model": { "type": "const2", "states": 2 }, "alpha": -1.0 }"#);
    assert_eq!(invoke("solve-discounted", &cfg, dir.path()), 2);
    let missing = dir.path().join("absent.json");
    assert_eq!(invoke("validate", &missing, dir.path()), 2);
}

#[test]
fn commands_needing_alpha_refuse_without_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{ "model": { "type": "const2", "states": 2 } }"#);
    assert_eq!(invoke("compare", &cfg, dir.path()), 2);
}

#[test]
fn compare_on_const2_finds_no_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONST2);
    assert_eq!(invoke("compare", &cfg, dir.path()), 0);
    let text = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("state,V_ageaware,V_ageblind,relative_improvement"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], cols[2]);
        assert_eq!(cols[3], "0");
    }
}

#[test]
fn solve_discounted_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONST2);
    assert_eq!(invoke("solve-discounted", &cfg, dir.path()), 0);
    for f in ["values.csv", "phi.csv", "convergence.csv", "embedded.csv", "survival.csv", "cdf.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let values = std::fs::read_to_string(dir.path().join("values.csv")).unwrap();
    let v: Vec<f64> = values.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((v[0] - 1.0 / 3.0).abs() < 1e-6 && (v[1] - 2.0 / 3.0).abs() < 1e-6);
}

#[test]
fn model_path_resolves_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("models")).unwrap();
    write(&dir.path().join("models"), "m.json", r#"{ "type": "const2", "states": 2 }"#);
    let cfg = write(dir.path(), "c.json", r#"{ "model_path": "models/m.json", "alpha": 1.0 }"#);
    let loaded = ExperimentConfig::load(&cfg).unwrap();
    assert!(loaded.model.is_some() && loaded.model_path.is_none());
    let both = write(
        dir.path(),
        "both.json",
        r#"{ "model_path": "models/m.json", "model": { "type": "const2", "states": 2 } }"#,
    );
    assert!(ExperimentConfig::load(&both).is_err());
}

#[test]
fn config_round_trips() {
    let text = r#"{
  "model": {
    "type": "shock", "states": 3,
    "actions": { "dims": [{ "lo": 1.0, "hi": 2.0, "n": 3 }] },
    "cost": { "builtin": { "holding": { "kind": "age_saturating", "coef": 1.0, "cap": 5.0 } } }
  },
  "grid": { "y_max": 12.5, "n_nodes": 251 },
  "alpha": 0.3,
  "solver": { "tol": 1e-9, "max_iter": 5000 },
  "average": { "alpha_seq": [0.1, 0.05, 0.025], "bisection_tol": 1e-7, "reference_state": 2, "tol": 0.002 },
  "sim": { "paths": 123, "horizon": 40.0, "truncation": 0.01, "seed": 18446744073709551615, "start_state": 1,
           "n_jumps": 9, "replicas": 3, "policy": { "kind": "constant", "action": 2 }, "trajectory_horizon": 0.1 },
  "outputs": { "directory": "somewhere/else" }
}"#;
    let p = Path::new("round.json");
    let a = ExperimentConfig::from_json(text, p).unwrap();
    let b = ExperimentConfig::from_json(&a.to_json(), p).unwrap();
    assert_eq!(a, b);
    let minimal = ExperimentConfig::from_json(CONST2, p).unwrap();
    assert_eq!(ExperimentConfig::from_json(&minimal.to_json(), p).unwrap(), minimal);
}
