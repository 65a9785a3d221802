use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cpqsd(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpqsd"))
        .args(args)
        .env("CPQSD_THREADS", threads)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn data(dir: &Path, name: &str) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap();
    v["data"].clone()
}

#[test]
fn spectral_writes_converged_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpqsd(&["spectral", "--lambda", "0.5", "--L", "12", "--out", dir.path().to_str().unwrap()], "1");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = data(dir.path(), "spectral.json");
    assert!(s["residuals"]["left"].as_f64().unwrap() <= 1e-8);
    assert!(s["residuals"]["right"].as_f64().unwrap() <= 1e-8);
    assert_eq!(s["L"], 12);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["policy"], "clip");
    assert!(manifest["files"]["nu.csv"].is_string());
}

#[test]
fn negative_lambda_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpqsd(&["spectral", "--lambda", "-1", "--out", dir.path().to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn unknown_flag_exits_2() {
    let out = cpqsd(&["spectral", "--lambduh", "1"], "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn yaglom_example_and_thread_independence() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        ["yaglom", "--lambda", "0.5", "--t", "20", "--L", "10", "--target-survivors", "100000", "--out"]
            .iter()
            .map(|s| s.to_string())
            .chain([d.to_str().unwrap().to_string()])
            .collect::<Vec<_>>()
    };
    let run = |d: &Path, threads| {
        let v = args(d);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        let out = cpqsd(&refs, threads);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(a.path(), "1");
    run(b.path(), "3");
    let csv = fs::read_to_string(a.path().join("yaglom_t20.csv")).unwrap();
    assert!(csv.starts_with("# run_id="));
    assert!(csv.contains("key,count"));
    assert!(data(a.path(), "diagnostics_t20.json")["survivors"].as_u64().unwrap() > 0);
    for f in ["yaglom_t20.csv", "diagnostics_t20.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn run_file_wins_over_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    fs::write(&file, "lambda = 0.3\nL = 6\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = cpqsd(
        &["spectral", "--lambda", "0.5", "--config", file.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        "1",
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("overrides flag `lambda`"));
    let s = data(&out_dir, "spectral.json");
    assert_eq!(s["lambda"], 0.3);
    assert_eq!(s["L"], 6);
}

#[test]
fn malformed_run_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    fs::write(&file, "lambda = \"fast\"\n").unwrap();
    let out = cpqsd(&["spectral", "--config", file.to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resolution_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpqsd(
        &["breakpoints", "--t", "4", "--target-survivors", "100", "--out", dir.path().to_str().unwrap()],
        "1",
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn breakpoints_writes_space_time_diagram() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpqsd(&["breakpoints", "--t", "3", "--replicas", "2", "--out", dir.path().to_str().unwrap()], "1");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("space_time.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("kind,site,time"));
    let lines = fs::read_to_string(dir.path().join("breakpoints.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
}
