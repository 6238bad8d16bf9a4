use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_viscokit"));
    c.env_remove("VISCOKIT_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let k = header.iter().position(|h| *h == name).expect("column present");
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn version_and_help() {
    let out = run(&["--version"]);
    assert!(out.status.success());
    assert!(text(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
    let out = run(&["--help"]);
    assert!(out.status.success());
    for cmd in ["verify", "simulate", "fit"] {
        assert!(text(&out.stdout).contains(cmd));
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_lists_all_suites() {
    let out = run(&["verify", "--list"]);
    assert!(out.status.success());
    assert_eq!(text(&out.stdout).lines().count(), 13);
}

#[test]
fn verify_exit_codes() {
    let ok = run(&["verify", "--filter", "strains"]);
    assert_eq!(ok.status.code(), Some(0), "{}", text(&ok.stdout));
    assert!(text(&ok.stdout).contains("PASS strains"));
    let unknown = run(&["verify", "--filter", "no-such-suite"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn sequential_flag_and_thread_cap() {
    let out = bin().args(["--sequential", "verify", "--filter", "kinbridge"]).output().unwrap();
    assert!(out.status.success());
    let out = bin().env("VISCOKIT_THREADS", "2").args(["verify", "--filter", "kinbridge"]).output().unwrap();
    assert!(out.status.success());
    let bad = bin().env("VISCOKIT_THREADS", "zero").args(["verify", "--list"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(text(&bad.stderr).contains("VISCOKIT_THREADS"));
}

#[test]
fn simulate_creep_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("creep.csv");
    let cfg = configs().join("creep.toml");
    let out = run(&["simulate", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = std::fs::read_to_string(&csv).unwrap();
    let t = column(&body, "t");
    assert_eq!(t.len(), 4000);
    assert!((t.last().unwrap() - 200.0).abs() < 1e-9);
    let stretch = column(&body, "F33");
    assert!(stretch.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    let q = column(&body, "normQ_1");
    assert!(q.last().unwrap() < &q[20]);
}

#[test]
fn simulate_creep_relaxes_by_the_end() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("creep.csv");
    let cfg = configs().join("creep.toml");
    let out = run(&["simulate", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let q = column(&std::fs::read_to_string(&csv).unwrap(), "normQ_1");
    let mu1 = 4.225e5;
    assert!(q.last().unwrap() / mu1 <= 1e-6, "final normQ_1 / mu1 = {:e}", q.last().unwrap() / mu1);
}

#[test]
fn simulate_many_into_directory() {
    let dir = tempfile::tempdir().unwrap();
    let a = configs().join("shear.toml");
    let b = configs().join("bearing_shear.toml");
    let target = dir.path().join("runs");
    let out = run(&["simulate", a.to_str().unwrap(), b.to_str().unwrap(), "--out", target.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for stem in ["shear", "bearing_shear"] {
        let body = std::fs::read_to_string(target.join(format!("{stem}.csv"))).unwrap();
        assert!(body.lines().count() > 1000);
    }
    let missing = run(&["simulate", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text_cfg = std::fs::read_to_string(configs().join("creep.toml"))
        .unwrap()
        .replacen("mu = 4.225e5\ntau", "mu = -4.225e5\ntau", 1);
    std::fs::write(&cfg, text_cfg).unwrap();
    let out = run(&["simulate", cfg.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("material.maxwell[0].mu"), "{}", text(&out.stderr));
    assert!(!dir.path().join("x.csv").exists());

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[material]\nmodulus = 3\n").unwrap();
    let out = run(&["simulate", unknown.to_str().unwrap(), "--out", "ignored.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("fit.json");
    let data = configs().join("synthetic_data.csv");
    let cfg = configs().join("fit_two_branch.toml");
    let out = run(&["fit", data.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", json.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["converged"], true);
    assert!(v["chi2_total"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["parameters"].as_array().unwrap().len(), 2);
    for mode in ["UT", "ET", "PS"] {
        assert!(v["chi2"][mode].is_number());
    }
}

#[test]
fn fit_rejects_bad_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "mode,stretch,nominal_stress\nUT,1.1,1e5\nXX,1.2,2e5\n").unwrap();
    let out = run(&["fit", data.to_str().unwrap(), "--out", dir.path().join("f.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 3"), "{}", text(&out.stderr));
}
