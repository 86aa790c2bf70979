mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermo-ident"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("case.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn run_writes_all_artifacts_with_schema() {
    let dir = tempfile::tempdir().unwrap();
    let text = common::SMALL.replace("[optimizer]", "").replace("[filter]", "[optimizer]\nmax_iters = 50\n\n[filter]");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = bin(&["run", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["mesh.txt", "target_fields.csv", "initial_fields.csv", "identified_fields.csv", "convergence.csv", "summary.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!out.join("error.txt").exists());
    for f in ["target_fields.csv", "initial_fields.csv", "identified_fields.csv"] {
        assert_eq!(header(&out.join(f)), ["field", "entity_id", "x", "y", "value"]);
        let mut r = csv::Reader::from_path(out.join(f)).unwrap();
        let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.iter().filter(|r| &r[0] == "E").count(), 16);
        assert_eq!(rows.iter().filter(|r| &r[0] == "dT").count(), 15);
        assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap().is_finite()));
    }
    assert_eq!(header(&out.join("convergence.csv")), ["iter", "subproblem", "J", "J_D", "J_T", "step_E", "step_T"]);
    let mut r = csv::Reader::from_path(out.join("convergence.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().enumerate().all(|(i, r)| r[0] == i.to_string() && &r[1] == "M"));
    assert_eq!(header(&out.join("summary.csv")), ["metric", "value"]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("scenario,identify_monolithic"));
    assert!(summary.contains("iterations,50"));
    assert!(summary.contains("eps_E,"));
}

#[test]
fn scenario_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), common::SMALL);
    let out = dir.path().join("s");
    let o = bin(&["run", &cfg, "--out", out.to_str().unwrap(), "--scenario", "ignore-temp", "--seed", "7"], dir.path());
    assert!(o.status.success());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("scenario,ignore_temp"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("ignore_temp:"));
}

#[test]
fn default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let text = common::SMALL.replace("kind = \"identify_monolithic\"", "kind = \"constant_temp\"\nvalue = 20.0");
    let cfg = write_config(dir.path(), &text);
    assert!(bin(&["run", &cfg], dir.path()).status.success());
    assert!(dir.path().join("runs/constant_temp/summary.csv").is_file());
}

#[test]
fn missing_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = common::SMALL.replace("[scenario]\nkind = \"identify_monolithic\"\n", "");
    let cfg = write_config(dir.path(), &text);
    let o = bin(&["run", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing field `scenario`"), "{err}");
}

#[test]
fn bad_values_name_their_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &common::SMALL.replace("youngs_radius = 1.5", "youngs_radius = -1.0"));
    let o = bin(&["run", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("filter.youngs_radius"));

    let o = bin(&["run", dir.path().join("absent.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_leaves_error_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &common::SMALL.replace("components = \"both\"", "components = \"x\""));
    let out = dir.path().join("f");
    let o = bin(&["run", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let msg = fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(msg.contains("insufficient constraints"), "{msg}");
}

#[test]
fn fdcheck_passes_on_small_case() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), common::SMALL);
    let o = bin(&["fdcheck", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.trim_start().starts_with("dT")));
    assert!(stdout.contains("max relative deviation"));
}

#[test]
fn mesh_gen_and_info() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::configs_dir().join("plate_linear_6.toml");
    let m = dir.path().join("plate.mesh");
    let o = bin(&["mesh", "gen", cfg.to_str().unwrap(), "-o", m.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let o = bin(&["mesh", "info", m.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("elements  646"), "{s}");
    assert!(s.contains("tag hole"));
}
