use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(cmd: &str, config: &Path, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_multiphoton"));
    c.arg(cmd).arg("--config").arg(config).args(extra);
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn stage_configs(out: &Path) -> Vec<(&'static str, Value)> {
    let run = json!({ "out_dir": out, "base_seed": 4242 });
    vec![
        ("ghz", json!({ "ghz": { "n_dots": 6 }, "run": run })),
        ("protect", json!({ "ghz": { "n_dots": 3 }, "protect": { "n_trajectories": 150 }, "run": run })),
        ("swap", json!({ "swap": { "t_end": 8.0 }, "run": run })),
        ("sweep", json!({ "sweep": { "d_range": [1.0, 10.0], "gamma_range": [1.0, 10.0], "n_d": 2, "n_gamma": 2 }, "run": run })),
        (
            "pipeline",
            json!({ "ghz": { "n_dots": 4 }, "protect": { "n_trajectories": 60, "kappa": 1.0 }, "swap": { "p_success": 0.9 }, "run": run }),
        ),
    ]
}

#[test]
fn reruns_are_byte_identical_at_any_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for (cmd, cfg) in stage_configs(&out) {
        let path = write_config(tmp.path(), &format!("{cmd}.json"), &cfg);
        let mut first: Option<(Vec<u8>, BTreeMap<String, Vec<u8>>)> = None;
        for workers in ["1", "2", "3"] {
            let _ = fs::remove_dir_all(&out);
            let o = run(cmd, &path, &["--workers", workers], &[]);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
            let files = snapshot(&out);
            assert!(files.contains_key("report.json"));
            match &first {
                None => first = Some((o.stdout, files)),
                Some((stdout, prev)) => {
                    assert_eq!(stdout, &o.stdout, "{cmd} stdout differs at {workers} workers");
                    assert_eq!(prev, &files, "{cmd} outputs differ at {workers} workers");
                }
            }
        }
    }
}

#[test]
fn row_counts_match_declared_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let configs = stage_configs(&out);
    let (_, protect) = &configs[1];
    let path = write_config(tmp.path(), "p.json", protect);
    assert!(run("protect", &path, &[], &[]).status.success());
    let rows = fs::read_to_string(out.join("trajectories.csv")).unwrap().lines().count() - 1;
    // two arms, three cavities each
    assert_eq!(rows, 2 * 150 * 3);

    let (_, sweep) = &configs[3];
    let path = write_config(tmp.path(), "s.json", sweep);
    assert!(run("sweep", &path, &["--format", "json"], &[]).status.success());
    let table: Vec<Value> = serde_json::from_slice(&fs::read(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(table.len(), 4);
    let comparison: Vec<Value> = serde_json::from_slice(&fs::read(out.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(comparison.len(), 1);
}

#[test]
fn ghz_report_carries_timing_and_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let path = write_config(tmp.path(), "g.json", &json!({ "ghz": { "n_dots": 2 }, "run": { "out_dir": out } }));
    let o = run("ghz", &path, &[], &[]);
    assert!(o.status.success());
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["schema"], "multiphoton.run/v1");
    assert!(report["fidelities"]["ghz"].as_f64().unwrap() >= 1.0 - 1e-10);
    assert!((report["timing"]["total"].as_f64().unwrap() - 7.853981633974483e-9).abs() < 1e-18);
    let state: Value = serde_json::from_slice(&fs::read(out.join("state.json")).unwrap()).unwrap();
    assert_eq!(state["corrected"]["re"].as_array().unwrap().len(), 4);
}

#[test]
fn environment_and_flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let path = write_config(tmp.path(), "g.json", &json!({ "ghz": { "n_dots": 2 }, "run": { "out_dir": out } }));
    let o = run("ghz", &path, &["--seed", "9"], &[("EP_GHZ__N_DOTS", "5")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["config"]["ghz"]["n_dots"], 5);
    assert_eq!(report["config"]["run"]["base_seed"], 9);
    assert_eq!(report["timing"]["n"], 5);
}

fn error_of(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr is JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let bad = write_config(tmp.path(), "bad.json", &json!({ "ghz": { "n_dots": 1, "j1": -1.0 }, "protect": { "n_trajectories": 0 } }));
    let o = run("ghz", &bad, &[], &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_of(&o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["messages"].as_array().unwrap().len(), 3);

    let unknown = write_config(tmp.path(), "unknown.json", &json!({ "ghz": { "dots": 4 } }));
    assert_eq!(run("ghz", &unknown, &[], &[]).status.code(), Some(2));
    let o = run("ghz", &unknown, &[], &[("EP_GHZ__NOPE", "1")]);
    assert_eq!(o.status.code(), Some(2));

    let odd = write_config(tmp.path(), "odd.json", &json!({ "ghz": { "n_dots": 3 }, "run": { "out_dir": out } }));
    assert_eq!(run("pipeline", &odd, &[], &[]).status.code(), Some(2));

    let stuck = write_config(
        tmp.path(),
        "stuck.json",
        &json!({ "sweep": { "d_range": [10.0, 10.0], "gamma_range": [10.0, 10.0], "n_d": 1, "n_gamma": 1, "t_end": 0.1, "max_doublings": 0 },
                 "run": { "out_dir": out } }),
    );
    let o = run("sweep", &stuck, &[], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_of(&o)["error"], "nonconvergence");
    assert!(fs::read_to_string(out.join("sweep.csv")).unwrap().contains(",0,"));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let blocked = write_config(tmp.path(), "blocked.json", &json!({ "run": { "out_dir": blocker.join("sub") } }));
    let o = run("ghz", &blocked, &[], &[]);
    assert_eq!(o.status.code(), Some(4));

    let coarse = write_config(tmp.path(), "coarse.json", &json!({ "swap": { "dt": 1.0 }, "run": { "out_dir": out } }));
    let o = run("swap", &coarse, &[], &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_of(&o)["error"], "stage");
}

#[test]
fn lossy_pipeline_sits_between_zero_and_ideal() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = json!({ "ghz": { "n_dots": 4 }, "protect": { "n_trajectories": 200, "kappa": 2.0 }, "swap": { "p_success": 0.9 },
                      "conversion": { "eta_bbo": 0.8, "detector_efficiency": 0.9 }, "run": { "out_dir": out } });
    let path = write_config(tmp.path(), "lossy.json", &cfg);
    let o = run("pipeline", &path, &[], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let f = report["fidelities"]["final"].as_f64().unwrap();
    assert!(f > 0.0 && f < 1.0, "{f}");
    let total = report["heralds"]["total"].as_f64().unwrap();
    let expected = 0.9f64.powi(4) * 0.9f64.powi(2) * (0.8f64 * 0.9).powi(2);
    assert!((total - expected).abs() < 1e-15);
}
