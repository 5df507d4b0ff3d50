use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use zanova::config::{self, ExperimentConfig};

fn zanova(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zanova"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn shipped(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shipped_configs_equal_builtin_defaults() {
    for c in config::Command::ALL {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("configs/{}.json", c.name()));
        let parsed = ExperimentConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed, ExperimentConfig::default_for(c), "{}", path.display());
    }
}

#[test]
fn decompose_writes_slices() {
    let dir = tempfile::tempdir().unwrap();
    let out = zanova(&["decompose"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("decompose_brownian_y0.csv")).unwrap();
    // k(., 0) = min(., 0) = 0, so the whole slice vanishes
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1..].iter().all(|x| x.abs() < 1e-12), "{line}");
    }
    assert!(dir.path().join("decompose_gaussian_y4.csv").exists());
}

#[test]
fn fit_report_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = zanova(&["fit-report", "--nodes", "60"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "zanova/1");
    assert_eq!(report["seed"], 2);
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);
    assert!(report["max_abs_mean"].as_f64().unwrap() < 1e-10);
    for f in ["design.csv", "model.csv", "submodel_1.csv", "submodel_2.csv", "submodel_1_2.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.starts_with("# schema: zanova/1\n"), "{f}");
    }
}

#[test]
fn standard_mode_fit_report_flags_means() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped("fit-report.json");
    cfg["model"]["mode"] = "standard".into();
    let path = write_config(dir.path(), "std.json", &cfg);
    let out = zanova(&["fit-report", "--config", &path], dir.path());
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["zero_mean_violation"], true);
    assert!(String::from_utf8_lossy(&out.stdout).contains("not centered"));
}

#[test]
fn malformed_config_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"seed\": 1,\n  \"doe\": {\"n\": 5, \"bounds\": [[0, 1]], \"extra\": true}\n}\n").unwrap();
    let out = zanova(&["fit-report", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown field `extra`") && err.contains("line 3"), "{err}");
}

#[test]
fn empty_design_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped("fit-report.json");
    cfg["doe"]["n"] = 0.into();
    let path = write_config(dir.path(), "empty.json", &cfg);
    let out = zanova(&["fit-report", "--config", &path], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped("fit-report.json");
    // so flat that the fitted predictor carries no resolvable variance
    cfg["model"]["components"][0]["kernel"]["theta"] = 1000.0.into();
    let path = write_config(dir.path(), "flat.json", &cfg);
    let out = zanova(&["fit-report", "--config", &path], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_passes_and_fails_on_impossible_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = zanova(&["verify"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);

    let mut cfg = shipped("verify.json");
    cfg["tolerances"]["submodel"] = 0.0.into();
    let path = write_config(dir.path(), "tight.json", &cfg);
    let out = zanova(&["verify", "--config", &path], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn replicate_noise_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = zanova(&["replicate-noise", "--replicates", "3", "--threads", "2", "--seed", "8"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("replicate_noise.csv")).unwrap();
    assert!(csv.contains("# seed: 8\n"));
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 6 * 4);
    assert_eq!(String::from_utf8_lossy(&out.stderr).matches("replicate ").count(), 3);
}
