//! The command line, driven through the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use vertexflow::cli::{fmt_f64, to_json_string, ExperimentConfig};
use vertexflow::lattice::ConfigurationRecord;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/configs").join(name)
}

fn vf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vertexflow")).args(args).env_remove("VERTEXFLOW_WORKERS").output().expect("binary runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(config(name)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn shipped_configs_round_trip_and_resolve() {
    for name in ["sc6v.json", "hs.json", "qhahn.json", "beta.json"] {
        let cfg = ExperimentConfig::load(&config(name)).unwrap();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again, "{name}");
        assert_eq!(cfg.to_json(), again.to_json());
        cfg.resolve().unwrap();
    }
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
        let s = fmt_f64(v);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{s}");
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }
    let text = to_json_string(&serde_json::json!({ "x": 0.1, "n": 3 }), false);
    assert_eq!(text, r#"{"n":3,"x":1.0000000000000001e-1}"#);
}

#[test]
fn non_monotone_coloring_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "sc6v.json", |v| v["domain"]["coloring"] = serde_json::json!([1, 3, 2, 4, 5, 6]));
    let out = vf(&["sample", "--model", "sc6v", "--config", bad.to_str().unwrap(), "--out", dir.path().join("b.jsonl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["pointer"], "/domain/coloring");
    assert_eq!(err["error"], "config");
}

#[test]
fn schema_errors_point_at_the_field() {
    let dir = tempfile::tempdir().unwrap();
    type Edit = Box<dyn FnOnce(&mut Value)>;
    let cases: Vec<(&str, Edit, &str)> = vec![
        ("hs.json", Box::new(|v: &mut Value| v["params"]["q"] = "x".into()), "/params/q"),
        ("hs.json", Box::new(|v: &mut Value| v["params"]["q"] = 1.5.into()), "/params/q"),
        ("hs.json", Box::new(|v: &mut Value| v["params"]["col_spins"] = serde_json::json!([2.5])), "/params/col_spins"),
        ("sc6v.json", Box::new(|v: &mut Value| v["domain"]["lower"] = "HHXVVV".into()), "/domain/lower"),
        ("sc6v.json", Box::new(|v: &mut Value| v["queries"][1]["colors"] = serde_json::json!([4, 2])), "/queries/1/colors/1"),
        ("sc6v.json", Box::new(|v: &mut Value| v["queries"][0]["points"] = serde_json::json!([[9.5, 0.5]])), "/queries/0/points/0"),
        ("qhahn.json", Box::new(|v: &mut Value| v["params"]["boundary_levels"] = serde_json::json!([3, 2])), "/params/boundary_levels/1"),
        ("beta.json", Box::new(|v: &mut Value| v["sampling"]["samples"] = 0.into()), "/sampling/samples"),
    ];
    for (name, edit, pointer) in cases {
        let path = write_config(dir.path(), name, edit);
        let out = vf(&["moment", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{pointer}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stderr_json(&out)["pointer"], pointer);
    }
}

#[test]
fn sample_is_deterministic_in_seed_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("hs.json");
    let run = |workers: &str, seed: &str, file: &str| {
        let path = dir.path().join(file);
        let out = Command::new(env!("CARGO_BIN_EXE_vertexflow"))
            .args(["sample", "--model", "hs", "--config", cfg.to_str().unwrap(), "--samples", "40", "--seed", seed, "--out", path.to_str().unwrap()])
            .env("VERTEXFLOW_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("1", "5", "a.jsonl");
    assert_eq!(a, run("4", "5", "b.jsonl"));
    assert_ne!(a, run("1", "6", "c.jsonl"));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 40);
    for l in lines {
        let rec: ConfigurationRecord = serde_json::from_str(l).unwrap();
        assert_eq!((rec.rows, rec.cols), (3, 3));
    }
}

#[test]
fn sample_writes_polymer_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    let out = vf(&["sample", "--model", "beta", "--config", config("beta.json").to_str().unwrap(), "--samples", "7", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 7);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["t_max"], 6);
    assert_eq!(first["delays"], serde_json::json!([1, 2]));
}

#[test]
fn model_flag_must_match_config() {
    let out = vf(&["sample", "--model", "qhahn", "--config", config("hs.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["pointer"], "/model");
    let out = vf(&["moment", "--theorem", "9.2", "--config", config("hs.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["pointer"], "/model");
}

#[test]
fn moment_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("m.csv");
    let out = vf(&["moment", "--theorem", "8.5", "--config", config("qhahn.json").to_str().unwrap(), "--samples", "4000", "--out", csv_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    for col in ["id", "value_re", "value_im", "err_est", "samples"] {
        assert!(header.iter().any(|h| h == col), "{col} missing from {header:?}");
    }
    assert_eq!(reader.records().count(), 4);

    let json_path = dir.path().join("m.json");
    let out = vf(&["moment", "--theorem", "qhahn", "--config", config("qhahn.json").to_str().unwrap(), "--out", json_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        let v = r["value_re"].as_f64().unwrap();
        assert!(v > 0.0 && v <= 1.0 + 1e-12);
        assert!(r["err_est"].as_f64().unwrap() < 1e-9);
    }
}

#[test]
fn moment_reads_a_separate_query_file() {
    let dir = tempfile::tempdir().unwrap();
    let query = dir.path().join("q.json");
    std::fs::write(&query, r#"{"points": [[0.5, 2.5]], "colors": [0], "pi": [1]}"#).unwrap();
    let out_path = dir.path().join("r.json");
    let out = vf(&[
        "moment",
        "--theorem",
        "6.1",
        "--config",
        config("sc6v.json").to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "point (0.5, 2.5) is inside the domain, not on its upper boundary");
    assert_eq!(stderr_json(&out)["pointer"], "");

    std::fs::write(&query, r#"[{"points": [[0.5, 3.5]], "colors": [0], "pi": [1]}]"#).unwrap();
    let out = vf(&[
        "moment",
        "--theorem",
        "skew",
        "--config",
        config("sc6v.json").to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    // Every one of the six paths exits to the right of (0.5, 3.5), so the moment is q^6.
    let v = doc["results"][0]["value_re"].as_f64().unwrap();
    assert!((v - 0.4f64.powi(6)).abs() < 1e-12, "{v}");
}

#[test]
fn kappa_of_identity_is_a_unit() {
    let out = vf(&["kappa", "--pi", "1,2,3", "--w", "0.5,1.5,2.5", "--q", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let k = doc["kappa"].as_array().unwrap();
    assert_eq!(k.len(), 1);
    assert_eq!(k[0]["rho"], serde_json::json!([1, 2, 3]));
    assert_eq!(k[0]["re"].as_f64().unwrap(), 1.0);
    let out = vf(&["kappa", "--pi", "1,1", "--w", "0.5,1.5", "--q", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn polymer_table_matches_the_geometric_law() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out =
        vf(&["polymer", "--sigma", "5", "--rho", "1.2", "--t-max", "5", "--delays", "0", "--samples", "20000", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&path).unwrap();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let (m, t): (i32, i32) = (rec[1].parse().unwrap(), rec[2].parse().unwrap());
        let (mean, se, exact): (f64, f64, f64) = (rec[3].parse().unwrap(), rec[4].parse().unwrap(), rec[5].parse().unwrap());
        if m == 1 {
            assert!((exact - (3.8f64 / 5.0).powi(t - 1)).abs() < 1e-9, "t = {t}: {exact}");
        }
        assert!((mean - exact).abs() <= 5.0 * se + 1e-12, "({m},{t}): {mean} ± {se} vs {exact}");
    }
}

#[test]
fn verify_reports_and_exits_by_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = vf(&["verify", "--suite", "local", "--trials", "50", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["passed"], true);
    assert!(doc["checks"].as_array().unwrap().len() >= 10);

    // A tolerance nobody can meet turns every deterministic check into a failure.
    let out = vf(&["verify", "--suite", "local", "--trials", "20", "--tolerance=-1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["passed"], false);
}

#[test]
fn bad_flags_exit_with_two() {
    assert_eq!(vf(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(vf(&["moment", "--theorem", "1.1", "--config", "x.json"]).status.code(), Some(2));
    assert_eq!(vf(&["moment", "--config", "/nonexistent/cfg.json"]).status.code(), Some(2));
    assert_eq!(vf(&["frobnicate"]).status.code(), Some(2));
}
