use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simplexlink"))
}

#[test]
fn codebook_prints_geometry() {
    let out = bin().args(["codebook", "--format", "simplex3d"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["D_min = 2.8284", "P_avg = 3.0000", "1.2494 dB"] {
        assert!(text.contains(needle), "missing {needle:?} in\n{text}");
    }
}

#[test]
fn missing_config_fails_without_writing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let status = bin()
        .args(["run", "does_not_exist.toml", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(!status.success());
    assert!(!out_dir.exists());
}

#[test]
fn reversed_osnr_range_is_a_usage_error() {
    let out = bin().args(["theory", "--format", "dpbpsk", "--osnr-range", "10:5:1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn theory_table_covers_requested_range() {
    let out = bin().args(["theory", "--format", "dpbpsk", "--osnr-range", "6:8:1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = text.lines().filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit())).count();
    assert_eq!(rows, 3, "{text}");
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        r#"
schema_version = 1
name = "tiny"
kind = "back_to_back"
formats = ["dpbpsk"]
symbol_rate = 16e9
sweep_values = [9.0]
frames_per_point = 1
base_seed = 5
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(&out_dir).status().unwrap();
    assert!(status.success());
    assert!(out_dir.join("tiny_dpbpsk.csv").is_file());
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("result.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
}
