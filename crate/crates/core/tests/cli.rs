use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_abase-lite"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_scenario(dir: &Path) -> PathBuf {
    let p = dir.join("small.json");
    let v = json!({
        "name": "small", "duration_s": 10, "seed": 1,
        "topology": {
            "pools": [{"name": "pool", "nodes": [{"name": "dn0", "ru_capacity": 10000, "storage_capacity": 1e12}]}],
            "tenants": [{"name": "t", "pool": "pool", "ru_quota": 2000, "partitions": 2, "proxies": 2}],
            "replica_count": 1
        },
        "workloads": [{"tenant": "t", "arrival": {"kind": "diurnal", "base": 800, "amplitude": 200, "period_s": 5},
                       "keys": {"kind": "zipf", "count": 1000, "exponent": 1.0}, "read_ratio": 0.9}]
    });
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn write_series(path: &Path, values: impl Iterator<Item = f64>) {
    let mut text = String::from("timestamp,value\n");
    for (i, v) in values.enumerate() {
        text.push_str(&format!("{},{v}\n", i * 3600));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn run_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["run", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.csv", "summary.json", "decisions.jsonl", "migrations.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("second,tenant,offered,success"));
    assert_eq!(csv.lines().count(), 11);

    let c = dir.path().join("c");
    let o = run(&["run", "--scenario", sc.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "99"]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(a.join("metrics.csv")).unwrap(), std::fs::read(c.join("metrics.csv")).unwrap());
}

#[test]
fn malformed_scenario_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"name\": \"x\",\n  \"duration_s\": ,\n}").unwrap();
    let o = run(&["run", "--scenario", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json") && err.contains("line 3"), "{err}");

    let invalid = dir.path().join("invalid.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(small_scenario(dir.path())).unwrap()).unwrap();
    v["workloads"][0]["tenant"] = json!("nobody");
    std::fs::write(&invalid, v.to_string()).unwrap();
    let o = run(&["run", "--scenario", invalid.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nobody"));
}

#[test]
fn missing_scenario_file_exits_2() {
    let o = run(&["run", "--scenario", "/nonexistent/scenario.json", "--out", "/tmp/never"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundled_pool_reschedule_prints_reductions() {
    let pool = scenarios().join("pools/fig10_pool.json");
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.jsonl");
    let o = run(&["reschedule", "--pool-state", pool.to_str().unwrap(), "--plan-out", plan.to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("% lower"), "{stdout}");
    let moves = std::fs::read_to_string(plan).unwrap();
    assert!(moves.lines().count() > 100);
    for line in moves.lines() {
        let m: Value = serde_json::from_str(line).unwrap();
        assert_ne!(m["src"], m["dst"]);
    }
}

fn snapshot(nodes: usize, replicas: Vec<(u32, u32)>) -> Value {
    let flat = |v: f64| json!(vec![v; 24]);
    json!({"snapshot": {"pools": [{
        "name": "p",
        "nodes": (0..nodes).map(|i| json!({"id": i, "ru_capacity": 1000.0, "storage_capacity": 1000.0})).collect::<Vec<_>>(),
        "replicas": replicas.iter().enumerate().map(|(i, (tenant, node))| json!({
            "tenant": tenant, "partition": i, "ordinal": 0, "node": node, "ru": flat(100.0), "storage": flat(100.0)
        })).collect::<Vec<_>>()
    }]}})
}

fn plan_lines(dir: &Path, doc: Value) -> usize {
    let state = dir.join("pool.json");
    std::fs::write(&state, doc.to_string()).unwrap();
    let plan = dir.join("plan.jsonl");
    let o = run(&["reschedule", "--pool-state", state.to_str().unwrap(), "--plan-out", plan.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(plan).unwrap().lines().count()
}

#[test]
fn single_node_and_balanced_pools_plan_nothing() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(plan_lines(dir.path(), snapshot(1, vec![(1, 0), (2, 0)])), 0);
    assert_eq!(plan_lines(dir.path(), snapshot(4, vec![(1, 0), (2, 1), (3, 2), (4, 3)])), 0);
}

#[test]
fn bad_pool_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pool.json");
    std::fs::write(&p, "{\"snapshot\": {\"pools\": [{\"name\": 3}]}}").unwrap();
    assert_eq!(run(&["reschedule", "--pool-state", p.to_str().unwrap()]).status.code(), Some(2));
}

fn forecast_doc(dir: &Path, values: Vec<f64>, quota: f64) -> Value {
    let series = dir.join("usage.csv");
    write_series(&series, values.into_iter());
    let out = dir.join("forecast.json");
    let o = run(&[
        "forecast",
        "--series",
        series.to_str().unwrap(),
        "--tenant-quota",
        &quota.to_string(),
        "--partitions",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap()
}

#[test]
fn forecast_recommendations_follow_the_band() {
    let dir = tempfile::tempdir().unwrap();
    let steady = forecast_doc(dir.path(), vec![700.0; 720], 1000.0);
    assert_eq!(steady["recommendation"]["action"], "none");

    let growing: Vec<f64> =
        (0..720).map(|t| 500.0 + t as f64 + 50.0 * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin()).collect();
    let up = forecast_doc(dir.path(), growing, 1500.0);
    assert_eq!(up["recommendation"]["action"], "scale_up");
    let u_max = up["result"]["u_max"].as_f64().unwrap();
    let q = up["recommendation"]["new_tenant_quota"].as_f64().unwrap();
    assert!((q - u_max / 0.65).abs() <= 1e-3 * q, "{q} vs {u_max}");
}

#[test]
fn short_history_falls_back_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("short.csv");
    write_series(&series, (0..48).map(|_| 100.0));
    let o = run(&["forecast", "--series", series.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("note:"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("recommendation: unavailable"));
}

#[test]
fn off_grid_series_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("gap.csv");
    std::fs::write(&series, "timestamp,value\n0,1\n3600,2\n9000,3\n").unwrap();
    let o = run(&["forecast", "--series", series.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}
