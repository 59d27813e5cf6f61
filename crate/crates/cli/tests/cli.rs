use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn korm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_korm")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr not json ({e}): {text}"))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn abalone() -> [String; 4] {
    ["--input".into(), data("abalone_keel.data"), "--schema".into(), data("abalone.schema")]
}

#[test]
fn run_emits_report_with_outliers_and_aggregates() {
    let [a, b, c, d] = abalone();
    let out = korm(&["run", &a, &b, &c, &d, "--k", "2", "--score-o", "2", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["metadata"]["config"]["seed"], 7);
    assert_eq!(v["metadata"]["points_read"], 4174);
    assert!(v["real_outliers"].is_array());
    assert!(v["aggregates"]["total_solution_cost"].is_number());
    assert!(v["timing"]["wall_seconds"].is_number());
}

#[test]
fn identical_runs_are_byte_identical_without_timing() {
    let [a, b, c, d] = abalone();
    let args = ["run", &a, &b, &c, &d, "--seed", "3", "--trace", "--no-timing"];
    let (x, y) = (korm(&args), korm(&args));
    assert!(x.status.success());
    assert_eq!(x.stdout, y.stdout);
    let v: serde_json::Value = serde_json::from_slice(&x.stdout).unwrap();
    assert!(v["timing"].is_null());
    assert!(v["phases"][0]["invocations"].is_array());
}

#[test]
fn unit_constants_are_a_config_error() {
    let [a, b, c, d] = abalone();
    let out = korm(&["run", &a, &b, &c, &d, "--gamma", "1", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "ConstraintError");
    assert!(out.stdout.is_empty());
}

#[test]
fn empty_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let out = korm(&["run", "--input", &empty, "--columns", "numeric,numeric"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "ShapeError");
}

#[test]
fn bad_cell_reports_row() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.csv", "1,2\n3,x\n");
    let out = korm(&["run", "--input", &f, "--columns", "numeric,numeric"]);
    assert_eq!(out.status.code(), Some(3));
    let e = stderr_json(&out);
    assert_eq!(e["error"], "ParseError");
    assert!(e["message"].as_str().unwrap().contains("row 2"));
}

#[test]
fn duplicate_head_is_a_degenerate_run_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "dup.csv", "1,1\n1,1\n1,1\n5,5\n6,6\n");
    let report = dir.path().join("r.json");
    let out = korm(&[
        "run",
        "--input",
        &f,
        "--columns",
        "numeric,numeric",
        "--num",
        "4",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"], "DegenerateLowerBoundError");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["abort"]["error"], "DegenerateLowerBoundError");
    assert_eq!(v["phases"].as_array().unwrap().len(), 0);
}

#[test]
fn csv_format_has_phase_rows() {
    let out = korm(&[
        "run",
        "--input",
        &data("tae.data"),
        "--schema",
        &data("tae.schema"),
        "--num",
        "50",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("phase,lower_bound,facility_cost"));
    assert!(lines.len() >= 4);
    assert!(!text.contains('\r'));
}

#[test]
fn dk_baseline_lists_seven() {
    let [a, b, c, d] = abalone();
    let out = korm(&["baseline", "--method", "dk", "--knn", "3", "--top-n", "7", &a, &b, &c, &d]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["method"], "dk");
    assert_eq!(v["outliers"].as_array().unwrap().len(), 7);
    let scores: Vec<f64> = v["ranking"].as_array().unwrap().iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn db_baseline_lists_indices() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::new();
    for i in 0..100 {
        body.push_str(&format!("{},{}\n", (i % 10) as f64 * 0.01, (i / 10) as f64 * 0.01));
    }
    body.push_str("50,50\n");
    let f = write(dir.path(), "pts.csv", &body);
    let out = korm(&[
        "baseline", "--method", "db-nl", "--radius", "0.45", "--fraction", "0.95", "--input", &f, "--columns",
        "numeric,numeric",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outliers"], serde_json::json!([100]));
}

#[test]
fn knn_too_large_is_a_range_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "five.csv", "1,2\n3,4\n5,6\n7,8\n9,9\n");
    let out = korm(&["baseline", "--method", "dk", "--knn", "50", "--input", &f, "--columns", "numeric,numeric"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "RangeError");
}

#[test]
fn bench_single_rep_table() {
    let dir = tempfile::tempdir().unwrap();
    let body: String = (0..10).map(|i| format!("{},{}\n", i, (i * 7) % 5)).collect();
    let f = write(dir.path(), "ten.csv", &body);
    let out = korm(&[
        "bench", "--input", &f, "--columns", "numeric,numeric", "--reps", "1", "--num", "5", "--knn", "2", "--top-n",
        "3", "--radius", "1.5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("method,dataset,n,parameters,reps,median_cpu_seconds"));
    for (line, m) in lines[1..].iter().zip(["korm", "dk", "db_nested_loop"]) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], m);
        assert_eq!(cols[2], "10");
        assert_eq!(cols[4], "1");
        assert!(cols[5].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn plotdata_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("ab.json");
    let [a, b, c, d] = abalone();
    let out = korm(&["run", &a, &b, &c, &d, "--no-timing", "--output", report.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let outliers = v["real_outliers"].as_array().unwrap().len();
    let medians = v["final_medians"].as_array().unwrap().len();

    let out = korm(&["plotdata", "--report", report.to_str().unwrap(), "--dims", "2,3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), outliers + medians);
    assert_eq!(rows.iter().filter(|r| r.starts_with("real_outlier,")).count(), outliers);
    let again = korm(&["plotdata", "--report", report.to_str().unwrap(), "--dims", "2,3"]);
    assert_eq!(text.as_bytes(), again.stdout.as_slice());
}

#[test]
fn tae_plot_has_no_outlier_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("tae.json");
    let out = korm(&[
        "run",
        "--input",
        &data("tae.data"),
        "--schema",
        &data("tae.schema"),
        "--k",
        "3",
        "--score-o",
        "3",
        "--num",
        "50",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = korm(&["plotdata", "--report", report.to_str().unwrap(), "--dims", "0,1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains("real_outlier"));
}

#[test]
fn corrupt_or_missing_report_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{ not json");
    let out = korm(&["plotdata", "--report", &bad, "--dims", "0,1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "ReportError");
    let missing = dir.path().join("nope.json");
    let out = korm(&["plotdata", "--report", missing.to_str().unwrap(), "--dims", "0,1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "IoError");
}
