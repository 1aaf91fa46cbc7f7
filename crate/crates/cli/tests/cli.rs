use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::{json, Value};

fn symneg(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_symneg"));
    cmd.args(args).env_remove("SYMNEG_OUT").env_remove("SYMNEG_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn zr_config(n_b: usize, samples: u64) -> Value {
    json!({
        "symmetry": {"kind": "zr", "r": 2},
        "geometry": {"n_a1": 2, "n_a2": 2, "n_b": n_b, "total_charge": 0, "q_a": 0},
        "ensemble": {"samples": samples, "seed": 3},
        "analysis": {"phase": {"r1_points": 10, "ratio_points": 10}, "circuit": {"shots": 500, "fidelity_inputs": 3}}
    })
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

#[test]
fn every_subcommand_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &zr_config(4, 60));
    let cfg = cfg.to_str().unwrap();
    for (sub, file) in [
        ("sample-spectrum", "summary.json"),
        ("theory-spectrum", "theory.json"),
        ("compare", "comparison.json"),
        ("phase-diagram", "phase.json"),
        ("moments", "moments.json"),
        ("mutual-info", "mutual_info.json"),
        ("circuit-demo", "circuit.json"),
    ] {
        let out = tmp.path().join(sub);
        let o = symneg(&[sub, "--config", cfg, "--out", out.to_str().unwrap()], &[]);
        let code = o.status.code().unwrap();
        assert!(code == 0 || (sub == "compare" && code == 2), "{sub}: exit {code}\n{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join(file).is_file(), "{sub} did not write {file}");
        let manifest = read_json(out.join("manifest.json"));
        assert_eq!(manifest["command"], sub);
        assert_eq!(manifest["seed"], 3);
    }
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(symneg(&["compare"], &[]).status.code(), Some(1));
    assert_eq!(symneg(&["no-such-command"], &[]).status.code(), Some(1));
    let missing = tmp.path().join("absent.json");
    assert_eq!(symneg(&["moments", "--config", missing.to_str().unwrap()], &[]).status.code(), Some(1));
    let bad = write_config(tmp.path(), "bad.json", &json!({"symmetry": {"kind": "zr", "r": 2}, "geometry": {"n_a1": 2}, "typo": 1}));
    let o = symneg(&["moments", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert_eq!(symneg(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn mismatched_comparison_exits_2_and_match_exits_0() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = zr_config(7, 300);
    v["geometry"] = json!({"n_a1": 3, "n_a2": 3, "n_b": 7, "total_charge": 0, "q_a": 0});
    let good = write_config(tmp.path(), "good.json", &v);
    let o = symneg(&["compare", "--config", good.to_str().unwrap(), "--out", tmp.path().join("g").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    v["analysis"]["theory"] = json!("unprojected-zr");
    let bad = write_config(tmp.path(), "bad.json", &v);
    let o = symneg(&["compare", "--config", bad.to_str().unwrap(), "--out", tmp.path().join("b").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn environment_and_flags_follow_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &zr_config(4, 20));
    let cfg = cfg.to_str().unwrap();
    let env_dir = tmp.path().join("from-env");
    let flag_dir = tmp.path().join("from-flag");
    let env = [("SYMNEG_OUT", env_dir.to_str().unwrap()), ("SYMNEG_WORKERS", "2")];

    assert!(symneg(&["moments", "--config", cfg], &env).status.success());
    let m = read_json(env_dir.join("manifest.json"));
    assert_eq!(m["config"]["ensemble"]["workers"], 2);

    assert!(symneg(&["moments", "--config", cfg, "--out", flag_dir.to_str().unwrap(), "--workers", "1"], &env).status.success());
    let m = read_json(flag_dir.join("manifest.json"));
    assert_eq!(m["config"]["ensemble"]["workers"], 1);
    assert_eq!(m["config"]["outputs"]["directory"], flag_dir.to_str().unwrap());
}

#[test]
fn log_base_switches_units() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &zr_config(3, 30));
    let cfg = cfg.to_str().unwrap();
    let run = |base: &str| {
        let dir = tmp.path().join(base);
        assert!(symneg(&["sample-spectrum", "--config", cfg, "--out", dir.to_str().unwrap(), "--log-base", base], &[]).status.success());
        read_json(dir.join("summary.json"))
    };
    let (bits, nats) = (run("2"), run("e"));
    assert_eq!(bits["log_unit"], "bits");
    assert_eq!(nats["log_unit"], "nats");
    let b = bits["log_negativity"]["mean"].as_f64().unwrap();
    let n = nats["log_negativity"]["mean"].as_f64().unwrap();
    assert!((b * std::f64::consts::LN_2 - n).abs() < 1e-12 * n.abs().max(1e-300));
    assert_eq!(symneg(&["moments", "--config", cfg, "--log-base", "10"], &[]).status.code(), Some(1));
}

#[test]
fn u1_circuit_demo_reports_two_rounds_for_three_sites() {
    let tmp = tempfile::tempdir().unwrap();
    let v = json!({
        "symmetry": {"kind": "u1"},
        "geometry": {"n_a1": 1, "n_a2": 1, "n_b": 3, "total_charge": 2, "q_a": 1},
        "analysis": {"circuit": {"shots": 400, "fidelity_inputs": 4}}
    });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let out = tmp.path().join("o");
    let o = symneg(&["circuit-demo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(out.join("circuit.json"));
    assert_eq!(report["rounds"], 2);
    assert_eq!(report["example_rounds"].as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("2 round(s)"));
}

#[test]
fn fifty_by_fifty_phase_scan_is_quick() {
    let tmp = tempfile::tempdir().unwrap();
    let v = json!({
        "symmetry": {"kind": "u1"},
        "geometry": {"n_a1": 4, "n_a2": 4, "n_b": 8, "total_charge": 8, "q_a": 4},
        "analysis": {"phase": {"nu_a": 0.3, "nu_b": 0.5, "r1_points": 50, "ratio_points": 50}}
    });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let out = tmp.path().join("o");
    let t0 = Instant::now();
    let o = symneg(&["phase-diagram", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success());
    assert!(t0.elapsed().as_secs_f64() < 60.0);
    let rows = std::fs::read_to_string(out.join("phase.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 50 * 50);
}
