use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wrof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrof"))
        .args(args)
        .env("WROF_THREADS", "2")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .display()
        .to_string()
}

fn write_measure(dir: &Path, name: &str, points: &[&[f64]], weights: &[f64]) -> String {
    let path = dir.join(name);
    let body = serde_json::json!({ "dim": points[0].len(), "points": points, "weights": weights });
    std::fs::write(&path, body.to_string()).unwrap();
    path.display().to_string()
}

fn dirac(dir: &Path, name: &str, x: f64) -> String {
    write_measure(dir, name, &[&[x]], &[1.0])
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(out));
    serde_json::from_str(&stdout(out)).unwrap()
}

fn close(a: &Value, b: f64) -> bool {
    (a.as_f64().unwrap() - b).abs() <= 1e-12
}

#[test]
fn ot_huber_between_diracs() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (
        dirac(dir.path(), "a.json", 0.0),
        dirac(dir.path(), "b.json", 3.0),
    );
    let report = json(&wrof(&["ot", &a, &b, "--cost", "huber", "--lambda", "1"]));
    assert!(close(&report["summary"]["value"], 2.5), "{report}");
}

#[test]
fn ot_identical_inputs_cost_nothing() {
    let mu = data("blobs_mu.json");
    let report = json(&wrof(&["ot", &mu, &mu]));
    assert!(close(&report["summary"]["value"], 0.0));
}

#[test]
fn ot_dimension_mismatch_is_a_usage_error() {
    let out = wrof(&["ot", &data("line_mu.json"), &data("blobs_nu.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("DimensionMismatch"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn huber_without_lambda_is_rejected() {
    let mu = data("line_mu.json");
    assert_eq!(
        wrof(&["ot", &mu, &mu, "--cost", "huber"]).status.code(),
        Some(2)
    );
}

#[test]
fn missing_file_exits_two() {
    let mu = data("line_mu.json");
    assert_eq!(
        wrof(&["ot", &mu, "/nonexistent/nu.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn wrof_far_diracs() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (
        dirac(dir.path(), "a.json", 0.0),
        dirac(dir.path(), "b.json", 3.0),
    );
    let report = json(&wrof(&["wrof", &a, &b, "--lambda", "1"]));
    assert!(close(&report["value"], 2.5));
    assert!(close(&report["divergence"], 2.0));
}

#[test]
fn wrof_same_measure_has_no_divergence() {
    let mu = data("blobs_mu.json");
    let report = json(&wrof(&["wrof", &mu, &mu, "--lambda", "0.3"]));
    assert!(close(&report["divergence"], 0.0));
    assert!(close(&report["value"], 0.0));
}

#[test]
fn wrof_rejects_nonpositive_lambda() {
    let mu = data("line_mu.json");
    let out = wrof(&["wrof", &mu, &mu, "--lambda", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("NonPositiveLambda"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn wrof_writes_plot_data() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let o = out_dir.display().to_string();
    let out = wrof(&[
        "wrof",
        &data("line_mu.json"),
        &data("line_nu.json"),
        "--lambda",
        "0.2",
        "--emit-plots",
        "-o",
        &o,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out_dir.join("wrof.json").is_file());
    let csv = std::fs::read_to_string(out_dir.join("displacements.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    for line in csv.lines().skip(1) {
        let step: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(step <= 0.2 + 1e-9);
    }
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("no column {name} in {header:?}"));
    lines
        .map(|l| l.split(',').nth(k).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn iterate_walks_dirac_home() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (
        dirac(dir.path(), "a.json", 0.0),
        dirac(dir.path(), "b.json", 3.0),
    );
    let out = wrof(&["iterate", &a, &b, "--lambda", "1", "--stages", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        column(&stdout(&out), "w1_to_nu"),
        vec![3.0, 2.0, 1.0, 0.0, 0.0]
    );
}

#[test]
fn iterate_from_target_stays_put() {
    let mu = data("blobs_nu.json");
    let out = wrof(&["iterate", &mu, &mu, "--halving", "0.5", "--stages", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(column(&stdout(&out), "w1_to_nu").iter().all(|&w| w == 0.0));
}

#[test]
fn iterate_snapshots() {
    let dir = TempDir::new().unwrap();
    let o = dir.path().join("run").display().to_string();
    let out = wrof(&[
        "iterate",
        &data("line_mu.json"),
        &data("line_nu.json"),
        "--schedule",
        "0.3,0.2,0.1",
        "-o",
        &o,
        "--snapshots",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let snaps = dir.path().join("run/snapshots");
    for n in 0..=3 {
        assert!(snaps.join(format!("mu_{n:03}.json")).is_file());
    }
    assert!(dir.path().join("run/trace.json").is_file());
}

#[test]
fn multiscale_telescopes() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (
        dirac(dir.path(), "a.json", 4.0),
        dirac(dir.path(), "b.json", 0.0),
    );
    let o = dir.path().join("ms").display().to_string();
    let out = wrof(&[
        "multiscale",
        &a,
        &b,
        "--lambda0",
        "1",
        "--stages",
        "8",
        "-o",
        &o,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let ledger: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ms/ledger.json")).unwrap())
            .unwrap();
    assert!(close(&ledger["total_left"], 8.0));
    assert!(ledger["identity_error"].as_f64().unwrap() <= 1e-12);
    assert!(dir.path().join("ms/ledger.csv").is_file());
}

#[test]
fn verify_identities_passes() {
    let dir = TempDir::new().unwrap();
    let o = dir.path().display().to_string();
    let out = wrof(&[
        "verify",
        "--suite",
        "identities",
        "--instances",
        "50",
        "--seed",
        "7",
        "-o",
        &o,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap())
            .unwrap();
    assert_eq!(report["passed"], 50);
    assert_eq!(report["failed"], 0);
}

#[test]
fn verify_empty_suite_is_an_error() {
    let out = wrof(&["verify", "--instances", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("EmptySuite"));
}

#[test]
fn verify_oracle_skips_over_budget() {
    let out = wrof(&[
        "verify",
        "--suite",
        "oracle",
        "--instances",
        "3",
        "--seed",
        "1",
        "--max-atoms",
        "120",
    ]);
    let report = json(&out);
    let skipped = report["skipped"].as_u64().unwrap();
    assert!(skipped > 0, "{report}");
    assert_eq!(report["failed"], 0);
    let notes = report["results"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["status"] == "skipped");
    for r in notes {
        assert!(r["note"].as_str().unwrap().contains("budget"));
    }
}

#[test]
fn outputs_are_deterministic() {
    let args = [
        "verify",
        "--suite",
        "all",
        "--instances",
        "6",
        "--seed",
        "3",
    ];
    let first = wrof(&args);
    let again = Command::new(env!("CARGO_BIN_EXE_wrof"))
        .args(args)
        .env("WROF_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(first.stdout, again.stdout);

    let (mu, nu) = (data("blobs_mu.json"), data("blobs_nu.json"));
    let a = wrof(&["wrof", &mu, &nu, "--lambda", "0.2"]);
    let b = wrof(&["wrof", &mu, &nu, "--lambda", "0.2"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn pgm_inputs() {
    let out = wrof(&[
        "ot",
        &data("ramp.pgm"),
        &data("corners.pgm"),
        "--domain",
        "0,0,2,1",
    ]);
    let report = json(&out);
    assert!(report["summary"]["value"].as_f64().unwrap() > 0.0);
    let same = json(&wrof(&["ot", &data("ramp.pgm"), &data("ramp.pgm")]));
    assert!(close(&same["summary"]["value"], 0.0));
}

#[test]
fn csv_input_matches_json() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("mu.csv");
    std::fs::write(&csv, "x,weight\n0.0,0.3\n0.15,0.45\n0.4,0.25\n").unwrap();
    let csv = csv.display().to_string();
    let nu = data("line_nu.json");
    let a = json(&wrof(&["ot", &csv, &nu]));
    let b = json(&wrof(&["ot", &data("line_mu.json"), &nu]));
    assert_eq!(a["summary"]["value"], b["summary"]["value"]);
}
