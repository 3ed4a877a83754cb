use std::path::Path;
use std::process::{Command, Output};

use smoothmix::harness::{read_kl_csv, redact_timings};

const BIN: &str = env!("CARGO_BIN_EXE_smoothmix");

const EXPONENTIAL: &str = r#"
models = ["M0"]
m_grid = [16, 64, 256, 1024]
n = 100000
seed = 7

[target]
family = "exponential"
rate = { type = "constant", value = 1.0 }
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SMOOTHMIX_LOG").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn converge_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", EXPONENTIAL);
    let out = dir.path().join("out");
    let o = run(&["converge", "--config", &cfg, "--out", out.to_str().unwrap(), "--dump-model"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_kl_csv(&out.join("kl_series.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.m).collect::<Vec<_>>(), vec![16, 64, 256, 1024]);
    let header = std::fs::read_to_string(out.join("kl_series.csv")).unwrap();
    assert!(header.starts_with("m,kind,value,se,n,method,seed\n"));
    assert!(out.join("report.json").exists() && out.join("plot_kl.py").exists());
    assert!(out.join("models").join("M0_m1024.json").exists());
}

#[test]
fn decreasing_grid_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &EXPONENTIAL.replace("[16, 64, 256, 1024]", "[64, 16]"));
    let out = dir.path().join("out");
    let o = run(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &EXPONENTIAL.replace("seed = 7", "seed = \"seven\""));
    let o = run(&["converge", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn x_dependent_equal_probability_bound_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        r#"
models = ["M4"]
m_grid = [64]
n = 1000
seed = 1

[target]
family = "uniform"
upper = { type = "affine", intercept = 1.0, coef = [1.0] }
"#,
    );
    let o = run(&["bounds", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("depends on x"));
}

#[test]
fn lemma_sweep_zero_size_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["lemmas", "--size", "0", "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn lemma_sweep_writes_three_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["lemmas", "--size", "1000", "--seed", "1", "--out", dir.path().to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("lemmas.csv")).unwrap();
    assert_eq!(text.lines().count(), 3001);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let anchor = &report["lemma_anchors"][1];
    assert_eq!(anchor["lemma"], "gaussian_cube");
    assert!((anchor["margin"].as_f64().unwrap() - 0.0625).abs() < 1e-3);
}

#[test]
fn reruns_match_after_redaction_and_seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &EXPONENTIAL.replace("n = 100000", "n = 20000"));
    let go = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["converge", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(code(&run(&args)), 0);
        let report = redact_timings(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        (std::fs::read(out.join("kl_series.csv")).unwrap(), report)
    };
    let a = go("a", &[]);
    let b = go("b", &["--workers", "3"]);
    let c = go("c", &["--seed", "8"]);
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn rate_reads_a_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &EXPONENTIAL.replace("n = 100000", "n = 20000"));
    let out = dir.path().join("series");
    assert_eq!(code(&run(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    let csv = out.join("kl_series.csv");
    let rate_out = dir.path().join("rate");
    let o = run(&["rate", "--input", csv.to_str().unwrap(), "--config", &cfg, "--out", rate_out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rate_out.join("report.json")).unwrap()).unwrap();
    let slope = report["rate_fits"][0]["fit"]["slope"].as_f64().unwrap();
    assert!(slope < -0.1);
}
