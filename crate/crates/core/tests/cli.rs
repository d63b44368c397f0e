use std::path::{Path, PathBuf};

use clap::Parser;
use ringsource::cli::{execute, exit_code, Cli};
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn run(args: &[&str]) -> ringsource::Result<Value> {
    let cli = Cli::try_parse_from(std::iter::once("ringsource").chain(args.iter().copied())).unwrap();
    execute(&cli)
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn four_device_design_has_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = run(&["--config", config("device.json").to_str().unwrap(), "--out", out, "design"]).unwrap();
    let rows = r["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!((r["result"]["radius_m"].as_f64().unwrap() * 1e6 - 113.0).abs() < 0.05);
    assert!((rows[0]["extinction_ratio_db"].as_f64().unwrap() - 7.4).abs() < 0.05);
    let csv = std::fs::read_to_string(dir.path().join("design.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(r["seed"], 0);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_q_section_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"geometry":{"radius":113e-6},"mode":{"n_eff":1.85,"n_g":2.11,"a_eff":1.16e-12,"gamma":0.88,"beta2":-8.5e-26,"wavelength_nm":1540.5}}"#,
    );
    let err = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "design"]).unwrap_err();
    assert_eq!(exit_code(&err), 2);
    assert!(err.to_string().contains("`q`"), "{err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"pump":{"power_mw":1.0,"colour":"red"}}"#);
    let err = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "design"]).unwrap_err();
    assert_eq!(exit_code(&err), 2);
    assert!(err.to_string().contains("colour"), "{err}");
}

#[test]
fn corrupt_tag_file_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run(&["--config", config("pair_source.json").to_str().unwrap(), "--out", out, "--seed", "1", "simulate"]).unwrap();
    let tags = dir.path().join("tags.qtag");
    let mut bytes = std::fs::read(&tags).unwrap();
    bytes[0] = b'X';
    let bad = dir.path().join("bad.qtag");
    std::fs::write(&bad, &bytes).unwrap();
    let err = run(&["--out", out, "analyze", bad.to_str().unwrap()]).unwrap_err();
    assert_eq!(exit_code(&err), 3);
    assert!(err.to_string().contains("offset 0"), "{err}");
    // cut mid-record
    let cut = dir.path().join("cut.qtag");
    std::fs::write(&cut, &std::fs::read(&tags).unwrap()[..32 + 16 * 3 + 5]).unwrap();
    let err = run(&["--out", out, "analyze", cut.to_str().unwrap()]).unwrap_err();
    assert_eq!(exit_code(&err), 3);
    assert!(err.to_string().contains(&format!("offset {}", 32 + 16 * 3)), "{err}");
}

#[test]
fn empty_tag_file_analyzes_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "channel,timestamp_ps\n");
    let r = run(&["--out", dir.path().to_str().unwrap(), "analyze", empty.to_str().unwrap()]).unwrap();
    let entry = &r["result"]["inputs"][0];
    assert_eq!(entry["records"], 0);
    assert!(entry["diagnostics"].as_str().unwrap().contains("zero counts"));
}

#[test]
fn franson_scan_recovers_visibility_and_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("franson_scan.json");
    let sim = run(&["--config", cfg.to_str().unwrap(), "--out", out, "simulate"]).unwrap();
    let outputs = sim["result"]["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 16);
    let files: Vec<String> = outputs.iter().map(|o| o["file"].as_str().unwrap().to_string()).collect();
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", out, "analyze"];
    args.extend(files.iter().map(String::as_str));
    let r = run(&args).unwrap();
    let vis = &r["result"]["visibility"];
    let v = vis["fit"]["subtracted"]["visibility"].as_f64().unwrap();
    assert!((v - 0.9955).abs() < 0.03, "{v}");
    let chsh = &vis["chsh"];
    assert!(chsh["s_value"].as_f64().unwrap() > 2.0);
    assert!(chsh["violation_sigmas"].as_f64().unwrap() > 3.0);
    assert!(dir.path().join("visibility.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = config("pair_source.json");
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        run(&["--config", cfg.to_str().unwrap(), "--out", out, "--format", "csv", "simulate"]).unwrap();
        let tags = dir.path().join("tags.csv");
        run(&["--config", cfg.to_str().unwrap(), "--out", out, "analyze", tags.to_str().unwrap()]).unwrap();
        let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
        let analyze: Value = serde_json::from_slice(&read("analyze.json")).unwrap();
        snapshots.push((read("tags.csv"), read("histogram_tags.csv"), analyze["result"]["inputs"][0]["car"].clone()));
        assert_eq!(analyze["seed"], 7);
    }
    assert!(snapshots[0] == snapshots[1]);
}

#[test]
fn seed_flag_changes_the_stream() {
    let cfg = config("pair_source.json");
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--seed", "1", "simulate"]).unwrap();
    run(&["--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "2", "simulate"]).unwrap();
    assert_ne!(std::fs::read(a.join("tags.qtag")).unwrap(), std::fs::read(b.join("tags.qtag")).unwrap());
}

#[test]
fn optimize_reports_both_objectives() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("device.json");
    for (obj, ratio) in [("max-generation", 0.75), ("max-emitted", 0.6)] {
        let r = run(&["--config", cfg.to_str().unwrap(), "--out", out, "optimize", "--objective", obj]).unwrap();
        let got = r["result"]["optimum"]["ratio"].as_f64().unwrap();
        assert!((got - ratio).abs() < 1e-6, "{obj}: {got}");
    }
    assert!(dir.path().join("sweep.csv").exists());
}

#[test]
fn report_merges_and_flattens() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("device.json");
    run(&["--config", cfg.to_str().unwrap(), "--out", out, "design"]).unwrap();
    run(&["--config", cfg.to_str().unwrap(), "--out", out, "sweep"]).unwrap();
    let r = run(&["--config", cfg.to_str().unwrap(), "--out", out, "--format", "csv", "report"]).unwrap();
    let reports = r["result"]["reports"].as_object().unwrap();
    assert!(reports.contains_key("design") && reports.contains_key("sweep"));
    let flat = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(flat.starts_with("key,value"));
}

#[test]
fn event_cap_maps_to_config_exit() {
    let dir = tempfile::tempdir().unwrap();
    let body = std::fs::read_to_string(config("pair_source.json")).unwrap();
    let mut v: Value = serde_json::from_str(&body).unwrap();
    v["run"]["event_cap"] = 1000.into();
    let cfg = write(dir.path(), "c.json", &v.to_string());
    let err = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "simulate"]).unwrap_err();
    assert_eq!(exit_code(&err), 2);
}
