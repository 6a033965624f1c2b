use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mflab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn zero_chaos_sweep_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = configs().join("chaos_zero.toml");
    let o = mflab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "chaos.csv", "chaos_reports.json", "summary.md", "plot_chaos.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["passed"], true);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);

    std::fs::remove_file(out.join("summary.md")).unwrap();
    let o = mflab(&["report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("summary.md").is_file());
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"chaos_sweep\"\nunknown_key = 1\n").unwrap();
    let o = mflab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = mflab(&["run", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = mflab(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_without_manifest_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mflab(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_calculator_prints_json() {
    let o = mflab(&["bounds", "main", "--sigma", "2", "--lambda", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);

    let o = mflab(&["bounds", "heatflow", "--a", "0", "--term", "1:1"]);
    assert_eq!(o.status.code(), Some(2));
}
