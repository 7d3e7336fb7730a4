//! End-to-end checks of the command-line runner.

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stokes-shape-spectra"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn negative_node_count_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "seed = 1\n\n[mesh]\nnodes = -300\n");
    let out = run(&["scan"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn unknown_key_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[surface]\nkind = \"sphere\"\nradius = 1.0\ncolour = \"red\"\n");
    let out = run(&["validate-kernels"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn missing_config_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["scan"], &tmp.path().join("absent.toml"), &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_kernels_on_defaults_passes_quickly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "default.toml", "");
    let dir = tmp.path().join("out");
    let t = Instant::now();
    let out = run(&["validate-kernels", "--workers", "1"], &cfg, &dir);
    assert!(t.elapsed() < Duration::from_secs(60));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["all_passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 8);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

const SMALL_SCAN: &str = "[mesh]\nnodes = 50\n\n[scan]\nlambda_min = 18.0\nlambda_max = 22.0\nstep = 0.5\n";

#[test]
fn scan_writes_reproducible_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "scan.toml", SMALL_SCAN);
    let mut csvs = Vec::new();
    for k in 0..2 {
        let dir = tmp.path().join(format!("out{k}"));
        let out = run(&["scan"], &cfg, &dir);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(std::fs::read(dir.join("scan.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let mut rdr = csv::Reader::from_reader(csvs[0].as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["lambda", "sigma_min", "N", "delta"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert!(r[1].parse::<f64>().unwrap() > 0.0);
        assert_eq!(&r[2], "50");
    }
}

#[test]
fn solve_reuses_cached_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "scan.toml", SMALL_SCAN);
    let dir = tmp.path().join("out");
    assert_eq!(run(&["scan"], &cfg, &dir).status.code(), Some(0));
    let cache: Vec<_> = std::fs::read_dir(dir.join("cache")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(cache.len(), 1);
    let out = run(&["solve"], &cfg, &dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let eig: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("eigens.json")).unwrap()).unwrap();
    assert_eq!(eig["schema_version"], 1);
    let first = &eig["eigenvalues"][0];
    assert!((first["lambda"].as_f64().unwrap() - 20.1907).abs() < 0.05);
    assert_eq!(first["N"], 50);
    assert!(dir.join(first["phi_file"].as_str().unwrap()).exists());
}
