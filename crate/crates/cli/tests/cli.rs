use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lurye-ozf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write(dir: &Path, name: &str, value: &Value) {
    fs::write(dir.join(name), serde_json::to_string(value).unwrap()).unwrap();
}

fn read(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn with_config(config: Value) -> TempDir {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "config.json", &config);
    dir
}

#[test]
fn search_exit_codes() {
    let dir = with_config(json!({"plant": {"num": [-0.5], "den": [1]}}));
    let (code, _) = run(dir.path(), &["search", "--config", "config.json", "--out", "o"]);
    assert_eq!(code, 0);
    let report = read(&dir.path().join("o"), "search_report.json");
    assert_eq!(report["feasible"], true);
    let resolved = read(&dir.path().join("o"), "resolved_config.json");
    assert_eq!(resolved["search"]["grid_points"], 512);
    assert_eq!(resolved["plant"]["num"][0], -0.5);

    let dir = with_config(json!({"plant": {"num": [0.5], "den": [1]}}));
    let (code, _) = run(dir.path(), &["search", "--config", "config.json"]);
    assert_eq!(code, 3);
    let report = read(&dir.path().join("out"), "search_report.json");
    assert_eq!(report["certificate_verified"], true);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.json"), "{\"plant\": ").unwrap();
    assert_eq!(run(dir.path(), &["search", "--config", "bad.json"]).0, 2);
    write(dir.path(), "typo.json", &json!({"plant": {"num": [1], "den": [1]}, "serch": {}}));
    assert_eq!(run(dir.path(), &["search", "--config", "typo.json"]).0, 2);
    assert_eq!(run(dir.path(), &["search"]).0, 2);
    assert_eq!(run(dir.path(), &["search", "--config", "missing.json"]).0, 2);
    write(dir.path(), "unstable.json", &json!({"plant": {"num": [1], "den": [1, -2]}}));
    assert_eq!(run(dir.path(), &["search", "--config", "unstable.json"]).0, 2);
    assert_eq!(run(dir.path(), &["no-such-command"]).0, 2);
}

#[test]
fn plant_can_be_given_by_path() {
    let dir = with_config(json!({"plant": "g.json"}));
    write(dir.path(), "g.json", &json!({"num": [-0.5], "den": [1]}));
    assert_eq!(run(dir.path(), &["search", "--config", "config.json"]).0, 0);
}

#[test]
fn verify_configured_multiplier() {
    let m = json!({"B": 1, "coeffs": [-0.2, 1.0, -0.3]});
    let dir = with_config(json!({"plant": {"num": [-0.5], "den": [1]}, "multiplier": m}));
    assert_eq!(run(dir.path(), &["verify", "--config", "config.json"]).0, 0);
    let dir = with_config(json!({"plant": {"num": [0.5], "den": [1]}, "multiplier": m}));
    assert_eq!(run(dir.path(), &["verify", "--config", "config.json"]).0, 3);
    assert_eq!(read(&dir.path().join("out"), "verify_report.json")["pass"], false);
}

#[test]
fn decompose_operators_and_matrices() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "zero.json", &json!({"T": 3, "B": 1, "rows": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}));
    let (code, stdout) = run(d, &["decompose", "zero.json"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("terms 0"));
    assert_eq!(read(&d.join("out"), "decomposition.json")["terms"], json!([]));

    // 0.7 (I - swap(0, 1)) + 0.3 (I - shift) in C^{4,1}
    let rows = json!([[0.0, 1.0, -1.0], [-0.7, 1.0, -0.3], [0.0, 0.3, -0.3], [0.0, 0.3, -0.3]]);
    write(d, "op.json", &json!({"T": 4, "B": 1, "rows": rows}));
    assert_eq!(run(d, &["decompose", "op.json", "--out", "op"]).0, 0);
    let result = read(&d.join("op"), "decomposition.json");
    assert_eq!(result["kind"], "periodic_conic");
    assert!(result["residual"].as_f64().unwrap() <= 1e-8);

    write(d, "m.json", &json!({"matrix": [[1.0, -1.0], [-1.0, 1.0]]}));
    assert_eq!(run(d, &["decompose", "m.json", "--out", "m"]).0, 0);
    assert_eq!(read(&d.join("m"), "decomposition.json")["terms"].as_array().unwrap().len(), 1);

    write(d, "h.json", &json!([[2.0, -1.0], [0.0, 1.0]]));
    assert_eq!(run(d, &["decompose", "h.json", "--out", "h"]).0, 0);
    assert_eq!(read(&d.join("h"), "decomposition.json")["augmented"], true);

    write(d, "bad.json", &json!([[1.0, 1.0], [0.0, 1.0]]));
    assert_eq!(run(d, &["decompose", "bad.json"]).0, 2);
    write(d, "ds.json", &json!([[0.25, 0.75], [0.75, 0.25]]));
    assert_eq!(run(d, &["decompose", "ds.json"]).0, 2);
    assert_eq!(run(d, &["decompose", "ds.json", "--birkhoff", "--out", "ds"]).0, 0);
    assert_eq!(read(&d.join("ds"), "decomposition.json")["kind"], "birkhoff");
}

#[test]
fn check_pair_verdicts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "v.json", &json!({"start": 0, "values": [1.0, 2.0, -1.0]}));
    write(d, "w.json", &json!({"start": 0, "values": [0.5, 3.0, -2.0]}));
    write(d, "ws.json", &json!({"start": 0, "values": [3.0, 0.5, -2.0]}));
    write(d, "empty.json", &json!({"start": 0, "values": []}));
    assert_eq!(run(d, &["check-pair", "v.json", "w.json", "-t", "4", "-b", "1"]).0, 0);
    let (code, stdout) = run(d, &["check-pair", "v.json", "ws.json", "--period", "4", "--band", "1", "--out", "s"]);
    assert_eq!(code, 3);
    assert!(stdout.contains("not a member"));
    let verdict = read(&d.join("s"), "pair_verdict.json");
    assert!(verdict["witness"].is_object());
    assert!(verdict["min_value"].as_f64().unwrap() < 0.0);
    assert_eq!(run(d, &["check-pair", "empty.json", "empty.json", "-t", "3", "-b", "1"]).0, 0);
}

#[test]
fn certificate_for_a_negative_static_gain() {
    let dir = with_config(json!({
        "plant": {"num": [-0.5], "den": [1]},
        "certificate": {"T": 3, "B": 1, "gamma": 20.0, "H": 6}
    }));
    let (code, stdout) = run(dir.path(), &["certificate", "--config", "config.json"]);
    assert_eq!(code, 0, "{stdout}");
    let report = read(&dir.path().join("out"), "certificate.json");
    assert!(report["verified_max_eig"].as_f64().unwrap() <= 1e-8);
    assert_eq!(report["basis"].as_array().unwrap().len(), report["outcome"]["alpha"].as_array().unwrap().len());

    let dir = with_config(json!({
        "plant": {"num": [-0.5], "den": [1]},
        "certificate": {"T": 3, "B": 1, "gamma": 20.0, "H": 7}
    }));
    assert_eq!(run(dir.path(), &["certificate", "--config", "config.json"]).0, 2);
}

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = with_config(json!({
        "plant": {"num": [0.0, 0.5], "den": [1]},
        "simulation": {
            "nonlinearity": {"breakpoints": [[0.0, 0.0]], "left_slope": 0.5, "right_slope": 0.5},
            "input": {"start": 0, "values": [1.0]},
            "horizon": 5
        }
    }));
    assert_eq!(run(dir.path(), &["simulate", "--config", "config.json"]).0, 0);
    let csv = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,e_k,v_k,w_k,gain_tau");
    assert_eq!(lines.len(), 6);
    let v: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(v, vec![1.0, 0.25, 0.0625, 0.015625, 0.00390625]);
    let summary = read(&dir.path().join("out"), "simulation_summary.json");
    assert_eq!(summary["diverged"], false);

    let dir = with_config(json!({
        "plant": {"num": [0.3], "den": [1, -0.2]},
        "simulation": {"nonlinearity": {"breakpoints": [[0.0, 0.0]]}, "horizon": 8}
    }));
    assert_eq!(run(dir.path(), &["simulate", "--config", "config.json"]).0, 0);
    let csv = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(3) == Some("0")));

    let dir = with_config(json!({
        "plant": {"num": [0.5], "den": [1]},
        "simulation": {"nonlinearity": {"breakpoints": [[0.0, 0.0]], "left_slope": 3.0, "right_slope": 3.0}}
    }));
    assert_eq!(run(dir.path(), &["simulate", "--config", "config.json"]).0, 2);
}

#[test]
fn hunt_is_bounded_and_reproducible() {
    let config = json!({
        "plant": {"num": [-0.5], "den": [1]},
        "hunt": {
            "family": {"nonlinearity": {"slope_cap": 1.0}, "horizon": 24, "refinement_rounds": 1},
            "budget": 12,
            "probe": {"horizon": 12, "random_probes": 16}
        }
    });
    let dir = with_config(config);
    let d = dir.path();
    assert_eq!(run(d, &["hunt", "--config", "config.json", "--seed", "5", "--out", "a", "--jobs", "2"]).0, 0);
    assert_eq!(run(d, &["hunt", "--config", "config.json", "--seed", "5", "--out", "b"]).0, 0);
    let a = fs::read_to_string(d.join("a/hunt_report.json")).unwrap();
    let b = fs::read_to_string(d.join("b/hunt_report.json")).unwrap();
    assert_eq!(a, b);
    let report: Value = serde_json::from_str(&a).unwrap();
    assert!(report["incumbent"]["gamma"].as_f64().unwrap() <= 2.0 + 1e-12);
    assert_eq!(report["multiplier_check"]["violated"], false);
    assert_eq!(read(&d.join("a"), "resolved_config.json")["hunt"]["family"]["seed"], 5);
}

#[test]
fn flat_family_gives_zero_gain() {
    let dir = with_config(json!({
        "plant": {"num": [-0.5], "den": [1]},
        "hunt": {"family": {"nonlinearity": {"slope_cap": 0.0}, "horizon": 16}, "budget": 4}
    }));
    assert_eq!(run(dir.path(), &["hunt", "--config", "config.json"]).0, 0);
    let report = read(&dir.path().join("out"), "hunt_report.json");
    assert_eq!(report["incumbent"]["gamma"], 0.0);
    // eps ||w||^2 is all that is left of the inequality when N = 0
    assert_eq!(report["multiplier_check"]["violated"], true);
}
