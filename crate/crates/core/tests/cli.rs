use std::path::Path;
use std::process::{Command, Output};

use exoplore::config::RunConfig;

fn exoplore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exoplore")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("output_dir = \"{}\"\n{body}", dir.join("out").display())).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn print_config_defaults_parse_back() {
    let out = exoplore(&["print-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(RunConfig::from_toml_str(&text, "stdout").unwrap(), RunConfig::default());
}

#[test]
fn malformed_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_samples = \"many\"\n");
    let out = exoplore(&["gen-data", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn out_of_range_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[optimizer]\nstarts = 0\n");
    assert_eq!(exoplore(&["optimize", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_with_2() {
    let out = exoplore(&["pipeline", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_failure_exits_with_3_and_names_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = exoplore(&["train-surrogate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `input`"));
}

#[test]
fn zero_sample_pipeline_fails_in_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_samples = 0\n[gaits]\nscan_lengths = 3\n");
    let out = exoplore(&["pipeline", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampling"));
}

#[test]
fn compare_reports_metrics_and_zero_variance() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sim.csv"), "1.0\n1.0\n1.0\n1.0\n").unwrap();
    std::fs::write(dir.path().join("exp.csv"), "x\n0.0\n1.0\n2.0\n").unwrap();
    let body = format!(
        "[compare]\nsim = \"{}\"\nexp = \"{}\"\n",
        dir.path().join("sim.csv").display(),
        dir.path().join("exp.csv").display()
    );
    let cfg = write_config(dir.path(), &body);
    let out = exoplore(&["compare", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/compare.json")).unwrap()).unwrap();
    assert!(json["r"]["error"].as_str().unwrap().contains("variance"));
    assert!((json["nrmse"].as_f64().unwrap() - (2.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
    assert!(json["ndtw"].as_f64().unwrap() > 0.0);
}

#[test]
fn landscape_writes_grid_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n_samples = 200\n[gaits]\nscan_lengths = 3\n[surrogate]\nhidden = [8]\nepochs = 5\n[landscape]\nn_kappa = 4\nn_delay = 3\n",
    );
    for c in ["gen-data", "train-surrogate", "landscape"] {
        let out = exoplore(&[c, "--config", &cfg]);
        assert!(out.status.success(), "{c}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = std::fs::read_to_string(dir.path().join("out/landscape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    let svg = std::fs::read_to_string(dir.path().join("out/landscape.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}
