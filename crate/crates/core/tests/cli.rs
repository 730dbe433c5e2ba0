use std::path::Path;
use std::process::{Command, Output};

use proxyqas::pipeline::{CIRCUITS_FILE, DISTRIBUTIONS_FILE, PROXIES_FILE, REPORT_FILE, TIMINGS_FILE};
use serde_json::Value;

fn proxyqas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxyqas")).args(args).output().expect("binary runs")
}

const SMALL: &str = r#"
[dataset]
kind = "linearly_separable"
n = 80
d = 4

[run]
n_qubits = 4
population_size = 30
iterations = 2
workers = 1
seed = 3
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn search_without_config_is_a_usage_error() {
    let out = proxyqas(&["search"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("usage"));
}

#[test]
fn missing_config_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = proxyqas(&["search", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\npopulaton_size = 3\n");
    let out = proxyqas(&["search", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("populaton_size"));
}

#[test]
fn gen_data_bars_and_stripes_has_30_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bas.csv");
    let out = proxyqas(&["gen-data", "--kind", "bars_and_stripes", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap().len(), 17);
    let rows: Vec<Vec<String>> = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    assert_eq!(rows.len(), 30);
    let mut distinct = rows.iter().map(|r| r[..16].join(",")).collect::<Vec<_>>();
    distinct.sort();
    distinct.dedup();
    assert_eq!(distinct.len(), 30);
}

#[test]
fn gen_data_rejects_unknown_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = proxyqas(&["gen-data", "--kind", "spirals", "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn search_writes_consistent_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = proxyqas(&["search", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    for f in [REPORT_FILE, TIMINGS_FILE, PROXIES_FILE, CIRCUITS_FILE, DISTRIBUTIONS_FILE] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join(REPORT_FILE)).unwrap()).unwrap();
    let iterations = report["iterations"].as_array().unwrap();
    assert_eq!(iterations.len(), 3);
    for it in iterations {
        let circuits = it["circuits"].as_array().unwrap();
        assert_eq!(circuits.len(), 30);
        let survivors = circuits.iter().filter(|c| c["survived_filter"] == Value::Bool(true)).count();
        assert_eq!(survivors, 6);
        assert_eq!(it["selected"].as_array().unwrap().len(), 5);
    }
    let finals = report["final_results"].as_array().unwrap();
    assert_eq!(finals.len(), 5);
    for f in finals {
        let acc = f["test_accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    let mut reader = csv::Reader::from_path(out_dir.join(PROXIES_FILE)).unwrap();
    let col = reader.headers().unwrap().iter().position(|h| h == "iteration").unwrap();
    let mut per_iteration = [0usize; 3];
    for r in reader.records() {
        per_iteration[r.unwrap()[col].parse::<usize>().unwrap()] += 1;
    }
    assert_eq!(per_iteration, [30, 30, 30]);

    let circuits: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join(CIRCUITS_FILE)).unwrap()).unwrap();
    for c in circuits.as_array().unwrap() {
        proxyqas::Circuit::from_json(&c.to_string()).unwrap();
    }

    let timings: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join(TIMINGS_FILE)).unwrap()).unwrap();
    for t in timings["iterations"].as_array().unwrap() {
        let parts: f64 = ["t_filter", "t_proxies", "t_rank", "t_evolve"].iter().map(|k| t[k].as_f64().unwrap()).sum();
        let whole = t["t_iteration"].as_f64().unwrap();
        assert!(parts >= 0.95 * whole, "stages {parts} of {whole}");
    }
}

#[test]
fn seed_flag_overrides_config_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let read = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        let out = proxyqas(&["search", "--config", &cfg, "--seed", seed, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success());
        std::fs::read_to_string(out_dir.join(REPORT_FILE)).unwrap()
    };
    let a = read("a", "11");
    let b = read("b", "11");
    let c = read("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["seed"], 11);
}

#[test]
fn eval_circuit_reports_proxies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let json = r#"{"id":4,"n_qubits":2,"theta_count":1,"gates":[
        {"kind":"ry","qubits":[0],"role":{"type":"data","index":0,"scale":1.0}},
        {"kind":"ry","qubits":[1],"role":{"type":"data","index":1,"scale":1.0}},
        {"kind":"cx","qubits":[0,1]},
        {"kind":"rz","qubits":[1],"role":{"type":"variational","index":0}}]}"#;
    std::fs::write(&path, json).unwrap();
    let out = proxyqas(&["eval-circuit", "--circuit", path.to_str().unwrap(), "--dataset", "linearly_separable", "--n", "60", "--d", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &v[0];
    assert_eq!(row["id"], 4);
    assert!(row["proxies"]["kta"].as_f64().unwrap().abs() <= 1.0);
    assert_eq!(row["proxies"]["cnot_count"], 1);
}

#[test]
fn eval_circuit_with_bad_circuit_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"id":1,"n_qubits":1,"theta_count":0,"gates":[{"kind":"cx","qubits":[0,0]}]}"#).unwrap();
    let out = proxyqas(&["eval-circuit", "--circuit", path.to_str().unwrap(), "--dataset", "linearly_separable"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_scaling_writes_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[dataset]\nn = 60\nd = 3\n[run]\nn_qubits = 3\nworkers = 1\n");
    let out_file = dir.path().join("scaling.json");
    let out =
        proxyqas(&["bench-scaling", "--config", &cfg, "--populations", "10,20,30", "--repeats", "1", "--out", out_file.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_file).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 3);
    assert!(v["r_squared"].as_f64().unwrap().is_finite());
}

#[test]
fn bench_scaling_needs_three_sizes() {
    let out = proxyqas(&["bench-scaling", "--populations", "10,20"]);
    assert_eq!(out.status.code(), Some(1));
}
