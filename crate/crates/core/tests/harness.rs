use std::fs;
use std::path::Path;
use std::process::Command;

use waveguide_control::harness::{self, ExperimentConfig, RunManifest};
use waveguide_control::Error;

const TRIVIAL: &str = r#"
kind = "linear-null-control"
seed = 1
[grid]
m = 1
n = 1
supercell = 1
points = [16, 16]
[region]
full = true
[time]
horizon = 1.0
steps = 16
"#;

const XSB: &str = r#"
kind = "xsb-checks"
seed = 3
[grid]
m = 1
n = 1
supercell = 1
points = [16, 16]
[xsb]
samples = 4
bands = [1, 2]
nt = 64
gain_nt = 1024
"#;

fn wgctl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wgctl"))
        .args(args)
        .env("WGCTL_THREADS", "2")
        .output()
        .unwrap()
}

fn csvs(dir: &Path, m: &RunManifest) -> Vec<(String, Vec<u8>)> {
    m.files
        .iter()
        .filter(|f| f.name.ends_with(".csv"))
        .map(|f| (f.name.clone(), fs::read(dir.join(&f.name)).unwrap()))
        .collect()
}

#[test]
fn missing_region_is_named() {
    let text = TRIVIAL.replace("[region]\nfull = true\n", "");
    let err = ExperimentConfig::from_toml(&text).unwrap_err();
    match err {
        Error::Config { path, .. } => assert_eq!(path, "region"),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn wrong_interval_count_is_named() {
    let text = TRIVIAL.replace("full = true", "omega1 = []\nomega2 = [[0.0, 1.0]]");
    let err = ExperimentConfig::from_toml(&text).unwrap_err();
    assert!(matches!(err, Error::Config { ref path, .. } if path == "region.omega1"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = format!("{TRIVIAL}\n[solver]\ncg_tolerance = 1e-8\n");
    assert!(ExperimentConfig::from_toml(&text).is_err());
}

#[test]
fn trivial_control_uses_exact_gramian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(TRIVIAL).unwrap();
    let m = harness::run(&cfg, dir.path()).unwrap();
    assert!(m.passed(), "{:?}", m.invariants);
    // χ = φ = 1, s = 0: G = T·I, so λ_min = T and C_obs = 1/T
    assert!((m.summary["c_obs"] - 1.0).abs() < 1e-12, "{}", m.summary["c_obs"]);
    assert!(m.summary["ratio"] <= 1e-10);
    for f in &m.files {
        assert!(dir.path().join(&f.name).is_file(), "{}", f.name);
        assert_eq!(f.sha256.len(), 64);
    }
    let again = RunManifest::load(dir.path()).unwrap();
    assert_eq!(again.files.len(), m.files.len());
}

#[test]
fn replay_is_bitwise_identical() {
    let root = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(XSB).unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    let ma = harness::run(&cfg, &a).unwrap();
    let mb = harness::run(&cfg, &b).unwrap();
    let (ca, cb) = (csvs(&a, &ma), csvs(&b, &mb));
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(harness::report(dir.path(), &dir.path().join("bundle")).is_err());
}

#[test]
fn report_collates_single_and_multiple_runs() {
    let root = tempfile::tempdir().unwrap();
    let runs = root.path().join("runs");
    harness::run(&ExperimentConfig::from_toml(TRIVIAL).unwrap(), &runs.join("trivial")).unwrap();
    harness::run(&ExperimentConfig::from_toml(XSB).unwrap(), &runs.join("xsb")).unwrap();

    let single = harness::report(&runs.join("trivial"), &root.path().join("one")).unwrap();
    let summary = fs::read_to_string(root.path().join("one/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(single.iter().any(|p| p.file_name().unwrap() == "trivial__control.csv"));

    harness::report(&runs, &root.path().join("all")).unwrap();
    let summary = fs::read_to_string(root.path().join("all/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("trivial,linear-null-control,1,true"));
    assert!(rows[2].starts_with("xsb,xsb-checks,3,"));
}

#[test]
fn report_detects_tampering() {
    let root = tempfile::tempdir().unwrap();
    let run = root.path().join("run");
    let m = harness::run(&ExperimentConfig::from_toml(TRIVIAL).unwrap(), &run).unwrap();
    let victim = m.files.iter().find(|f| f.name.ends_with(".csv")).unwrap();
    fs::write(run.join(&victim.name), "tampered\n").unwrap();
    assert!(harness::report(&run, &root.path().join("bundle")).is_err());
}

#[test]
fn cli_exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let good = root.path().join("good.toml");
    fs::write(&good, TRIVIAL).unwrap();
    let bad = root.path().join("bad.toml");
    fs::write(&bad, TRIVIAL.replace("steps = 16", "steps = 0")).unwrap();

    assert_eq!(wgctl(&["validate", good.to_str().unwrap()]).status.code(), Some(0));
    let out = wgctl(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time.steps"));

    let run_dir = root.path().join("runs/good");
    let out = wgctl(&["run", good.to_str().unwrap(), "-o", run_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run_dir.join("manifest.json").is_file());
    let out = wgctl(&["report", root.path().join("runs").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(root.path().join("runs/report/summary.csv").is_file());
    assert_eq!(wgctl(&["report", root.path().join("nothing").to_str().unwrap()]).status.code(), Some(2));

    // a run whose asserted invariant fails exits with 1
    let strict = root.path().join("strict.toml");
    fs::write(&strict, TRIVIAL.replace("steps = 16", "steps = 16\n[solver]\ncg_max_iter = 1\nnull_tol = 1e-300")).unwrap();
    let out = wgctl(&["run", strict.to_str().unwrap(), "-o", root.path().join("strict").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
