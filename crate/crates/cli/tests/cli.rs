use std::path::Path;
use std::process::{Command, Output};

fn pcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcf-lab")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

#[test]
fn build_is_byte_identical() {
    let a = pcf(&["build", "sierpinski", "--level", "4"]);
    let b = pcf(&["build", "--fractal", "sierpinski", "--level", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["graph"]["level_counts"][4], 123);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    assert!(doc["conventions"]["discrete_energy"].as_str().unwrap().contains("ordered"));
}

#[test]
fn energy_beyond_built_level_is_a_usage_error() {
    let out = pcf(&["energy", "--fractal", "sierpinski", "--level", "3", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds built level"));
}

#[test]
fn schema_violations_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"fractal": "interval", "level": 4, "p": 2, "colour": "red"}"#).unwrap();
    assert_eq!(pcf(&["energy", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(pcf(&["energy"]).status.code(), Some(2));
    assert_eq!(pcf(&["energy", "--fractal", "koch"]).status.code(), Some(2));
    assert_eq!(pcf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pcf(&["besov", "--fractal", "interval", "--function", "nope"]).status.code(), Some(2));
}

#[test]
fn csv_carries_provenance_header() {
    let out = pcf(&["energy", "--fractal", "sierpinski", "--level", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    for key in ["# config_hash=", "# window=", "# convention.discrete_energy=", "# convention.besov_normalization="] {
        assert!(header.iter().any(|l| l.starts_with(key)), "missing {key}");
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let scaled: Vec<f64> = rdr.records().map(|r| r.unwrap()[4].parse().unwrap()).collect();
    assert_eq!(scaled.len(), 5);
    // harmonic data has constant scaled energy at the critical exponent
    assert!(scaled.iter().all(|s| (s - scaled[0]).abs() < 1e-9));
}

#[test]
fn outputs_go_to_the_requested_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let status = pcf(&["besov", "--config", &config("interval.json"), "--level", "12", "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(out.join("besov.csv")).unwrap();
    assert!(text.contains("under_resolved"));
    let extend = pcf(&["extend", "--fractal", "interval", "--level", "2", "--p", "3", "--boundary", "0,-1"]);
    let doc: serde_json::Value = serde_json::from_slice(&extend.stdout).unwrap();
    assert_eq!(doc["values"].as_array().unwrap().len(), 5);
}

#[test]
fn failing_verify_exits_one() {
    // σ above the critical exponent: the BBM reference blows up with depth
    let dir = tempfile::tempdir().unwrap();
    let out = pcf(&["verify", "--fractal", "interval", "--level", "8", "--sigma", "1.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(report["assertions"].as_array().unwrap().iter().any(|a| a["pass"] == false));
}

#[test]
fn thread_cap_does_not_change_results() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_pcf-lab"))
            .args(["heat", "--config", &config("sierpinski.json"), "--level", "5"])
            .env("PCF_LAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("3"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn shipped_configs_load() {
    for name in ["interval.json", "sierpinski.json"] {
        let cfg = pcf_lab::ExperimentConfig::load(Path::new(&config(name))).unwrap();
        assert_eq!(cfg.p, 2.0);
    }
}
