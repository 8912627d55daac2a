use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn modegraph(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modegraph"))
        .args(args)
        .current_dir(dir)
        .env_remove("MODEGRAPH_THREADS")
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn digests(manifest: &Value) -> Vec<(String, String)> {
    manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["file"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn grid_sweep_headline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = modegraph(&["localctrl", "--out", "g"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json_file(&tmp.path().join("g/summary.json"));
    assert_eq!(s["total"], 25281);
    let pct = s["percentage"].as_f64().unwrap();
    assert!((pct - 58.4).abs() <= 1.5, "{pct}");
    for f in ["sweep.csv", "heatmap.svg", "manifest.json"] {
        assert!(tmp.path().join("g").join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(tmp.path().join("g/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 25282);
}

#[test]
fn sampled_sweep_below_dimension_bound_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = modegraph(
        &["localctrl", "--sweep", "sample", "--count", "4", "--modes", "4", "--samples", "500", "--out", "s"],
        tmp.path(),
    );
    assert!(out.status.success());
    let s = json_file(&tmp.path().join("s/summary.json"));
    assert_eq!(s["controllable"], 0);
    assert_eq!(s["percentage"].as_f64(), Some(0.0));
}

#[test]
fn sampled_sweep_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |dir: &'static str| {
        vec!["localctrl", "--sweep", "sample", "--count", "3", "--modes", "6", "--samples", "400", "--seed", "11", "--out", dir]
    };
    assert!(modegraph(&args("a"), tmp.path()).status.success());
    assert!(modegraph(&[args("b"), vec!["--threads", "1"]].concat(), tmp.path()).status.success());
    let a = json_file(&tmp.path().join("a/manifest.json"));
    let b = json_file(&tmp.path().join("b/manifest.json"));
    assert_eq!(digests(&a), digests(&b));
    assert_eq!(b["threads"], 1);

    // Re-running from the manifest reproduces the outputs.
    let out = modegraph(&["localctrl", "--config", "a/manifest.json", "--out", "c"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c = json_file(&tmp.path().join("c/manifest.json"));
    assert_eq!(digests(&a), digests(&c));
}

#[test]
fn threads_from_environment_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_modegraph"));
        cmd.args(["equilibria", "--modes", "3", "--out", "e"]).args(extra).current_dir(tmp.path());
        match env {
            Some(v) => cmd.env("MODEGRAPH_THREADS", v),
            None => cmd.env_remove("MODEGRAPH_THREADS"),
        };
        assert!(cmd.output().unwrap().status.success());
        json_file(&tmp.path().join("e/manifest.json"))["threads"].clone()
    };
    assert_eq!(run(&[], Some("2")), 2);
    assert_eq!(run(&["--threads", "3"], Some("2")), 3);
}

#[test]
fn graph_components() {
    let tmp = tempfile::tempdir().unwrap();
    let comps = |args: &[&str]| {
        let out = modegraph(args, tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["components"].as_u64().unwrap()
    };
    assert_eq!(comps(&["graph", "--modes", "9", "--region", "0,1/2:desc", "--out", "a"]), 1);
    let scc = json_file(&tmp.path().join("a/scc.json"));
    assert_eq!(scc["count"], 1);
    let dot = std::fs::read_to_string(tmp.path().join("a/graph.dot")).unwrap();
    assert!(dot.contains("kind=basin"));
    assert!(comps(&["graph", "--modes", "6", "--out", "b"]) > 1);
    assert_eq!(comps(&["graph", "--modes", "6", "--region", "0,1/2", "--transit", "--out", "c"]), 1);
}

#[test]
fn format_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let out = modegraph(&["graph", "--modes", "3", "--format", "dot", "--out", "f"], tmp.path());
    assert!(out.status.success());
    let mut files: Vec<String> = std::fs::read_dir(tmp.path().join("f"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["graph.dot", "manifest.json"]);
    let out = modegraph(&["graph", "--modes", "3", "--format", "svg", "--out", "g"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plans() {
    let tmp = tempfile::tempdir().unwrap();
    let out = modegraph(&["plan", "--modes", "3", "--from", "1/4,3/4", "--to", "1/4,3/4", "--out", "a"], tmp.path());
    assert!(out.status.success());
    let s = json_file(&tmp.path().join("a/schedule.json"));
    assert!(s["steps"].as_array().unwrap().is_empty());

    let out = modegraph(&["plan", "--modes", "3", "--from", "1/6,5/6", "--to", "1/4,3/4", "--out", "b"], tmp.path());
    assert!(out.status.success());
    let s = json_file(&tmp.path().join("b/schedule.json"));
    let steps = s["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0]["mode"], 2);
    assert!(s["landing_error"].as_f64().unwrap() <= 1e-6);

    let out = modegraph(&["plan", "--modes", "6", "--from", "1/12,1/12", "--to", "1/4,3/4", "--out", "c"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));

    let out = modegraph(&["plan", "--modes", "3", "--from", "1/5,1/2", "--to", "1/4,3/4", "--out", "d"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_converges_to_cell_midpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "s.json",
        r#"{"initial_state": [0.30, 0.05], "schedule": [{"mode": 3, "duration": 40}]}"#,
    );
    let out = modegraph(&["simulate", "--config", &cfg, "--out", "s"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json_file(&tmp.path().join("s/summary.json"));
    let fin: Vec<f64> = serde_json::from_value(s["final_state"].clone()).unwrap();
    // Both coordinates start in the first cell of mode 3.
    for x in fin {
        assert!((x - 1.0 / 6.0).abs() < 1e-9, "{x}");
    }
    let csv = std::fs::read_to_string(tmp.path().join("s/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2\n"));
}

#[test]
fn simulate_zero_duration_echoes_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "z.json", r#"{"initial_state": [0.3, 0.7], "schedule": [{"mode": 2, "duration": 0}]}"#);
    let out = modegraph(&["simulate", "--config", &cfg, "--out", "z"], tmp.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(tmp.path().join("z/trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    let vals: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(vals, [0.0, 0.3, 0.7]);
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"initial_state": [0.3, 0.05], "schedule": [{"mode": 0, "duration": 1}]}"#,
        r#"{"initial_state": [0.3, 0.05], "unknown_key": 1}"#,
        r#"{"initial_state": [1.3, 0.05], "schedule": []}"#,
        r#"{"initial_state": [0.3], "schedule": []}"#,
        r#"{"device": {"channel_height_um": -1, "viscosity_pa_s": 1e-3, "acoustic_energy_j_m3": 1, "particles": [{"radius_um": 1}], "mode_count": 2}}"#,
        "{ not json",
    ];
    for (j, text) in cases.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{j}.json"), text);
        let out = modegraph(&["simulate", "--config", &cfg, "--out", "x"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "case {j}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let cfg = write(tmp.path(), "line.json", "{\n  \"initial_state\": [0.3, 0.05],\n  \"bogus\": true\n}");
    let out = modegraph(&["simulate", "--config", &cfg, "--out", "x"], tmp.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn equilibria_listing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = modegraph(&["equilibria", "--modes", "2", "--particles", "1", "--out", "e"], tmp.path());
    assert!(out.status.success());
    let list = json_file(&tmp.path().join("e/equilibria.json"));
    let coords: Vec<&str> = list.as_array().unwrap().iter().map(|n| n["coords"][0].as_str().unwrap()).collect();
    assert_eq!(coords, ["1/4", "1/2", "3/4"]);
}

#[test]
fn relax_benchmark_converges() {
    let tmp = tempfile::tempdir().unwrap();
    let out = modegraph(&["relax", "--out", "r"], tmp.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cases"], 10);
    assert!(v["worst_halving_ratio"].as_f64().unwrap() <= 0.7);
    let report = json_file(&tmp.path().join("r/errors.json"));
    assert_eq!(report.as_array().unwrap().len(), 10);
}

#[test]
fn relax_single_mixture_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "m.json",
        r#"{"initial_state": [0.3, 0.1], "mixture": {"breakpoints": [0], "weights": [[0.5, 0.5]], "horizon": 1.0}}"#,
    );
    let out = modegraph(&["relax", "--config", &cfg, "--out", "m"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("m/trajectory.csv").exists());
    let bad = write(
        tmp.path(),
        "w.json",
        r#"{"initial_state": [0.3, 0.1], "mixture": {"breakpoints": [0], "weights": [[0.5, 0.6]], "horizon": 1.0}}"#,
    );
    assert_eq!(modegraph(&["relax", "--config", &bad, "--out", "w"], tmp.path()).status.code(), Some(2));
}
