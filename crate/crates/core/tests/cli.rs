use std::fs;
use std::path::PathBuf;

use salign::cli::{cli_main, EXIT_BUDGET, EXIT_INPUT, EXIT_OK, EXIT_USAGE};

fn model() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data/running_example.slpn")
        .display()
        .to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("salign").chain(args.iter().copied());
    let code = cli_main(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn align_distance_only() {
    let m = model();
    let (code, out, _) = run(&["align", "--model", &m, "--trace", "a,d,c", "--alpha", "1", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["cost"], 1);
    let path: Vec<_> = v["moves"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|m| m["transition"].as_str())
        .collect();
    assert_eq!(path, ["t1", "t3"]);
    assert!((v["loss"].as_f64().unwrap() - 2f64.log10()).abs() < 1e-12);
}

#[test]
fn align_table_balanced() {
    let m = model();
    let (code, out, _) = run(&["align", "--model", &m, "--trace", "a,d,c", "--alpha", "0.5"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("t2") && out.contains("t4") && out.contains("t3"), "{out}");
    assert!(!out.contains("t1"), "{out}");
}

#[test]
fn align_trace_file_aligns_each_line() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.txt");
    fs::write(&log, "a,c\nb,c,d\n\nb,d,c\n").unwrap();
    let m = model();
    let (code, out, _) = run(&[
        "align", "--model", &m, "--trace-file", log.to_str().unwrap(), "--alpha", "0.5", "--format", "json",
    ]);
    assert_eq!(code, EXIT_OK);
    let costs: Vec<u64> = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["cost"].as_u64().unwrap())
        .collect();
    assert_eq!(costs, [0, 0, 0]);
}

#[test]
fn budget_exhaustion_exit_code() {
    let m = model();
    let (code, _, err) = run(&["align", "--model", &m, "--trace", "a,d,c", "--alpha", "0.5", "--node-budget", "1"]);
    assert_eq!(code, EXIT_BUDGET, "{err}");
}

#[test]
fn pareto_lists_front() {
    let m = model();
    let (code, out, _) = run(&["pareto", "--model", &m, "--trace", "a,d,c"]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "{out}");
    assert!(rows[0].starts_with("1\t1/100\t"));
}

#[test]
fn validate_reports_and_rejects() {
    let m = model();
    let (code, out, _) = run(&["validate", "--model", &m]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("ok: 4 places, 4 transitions"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.slpn");
    fs::write(&bad, fs::read_to_string(&m).unwrap().replace("weight 99", "weight 0")).unwrap();
    let (code, _, err) = run(&["validate", "--model", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("weight"), "{err}");

    let (code, _, _) = run(&["validate", "--model", "/nonexistent/model.slpn"]);
    assert_eq!(code, EXIT_INPUT);
}

#[test]
fn usage_errors() {
    let m = model();
    assert_eq!(run(&[]).0, EXIT_USAGE);
    assert_eq!(run(&["align", "--model", &m, "--alpha", "0.5"]).0, EXIT_USAGE);
    assert_eq!(run(&["align", "--model", &m, "--trace", "a", "--alpha", "1.5"]).0, EXIT_USAGE);
    assert_eq!(run(&["align", "--model", &m, "--trace", "a", "--alpha", "NaN"]).0, EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run(&["--help"]).0, EXIT_OK);
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.txt");
    let csv = dir.path().join("out.csv");
    fs::write(&log, "a,d,c\nb,c\n").unwrap();
    let m = model();
    let (code, _, err) = run(&[
        "bench", "--model", &m, "--log", log.to_str().unwrap(), "--alphas", "0,0.5,1", "--repeat", "2", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("trace,"));
    assert_eq!(lines.count(), 2 * 3 * 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_salign");
    let m = model();
    let ok = std::process::Command::new(bin)
        .args(["align", "--model", &m, "--trace", "a,d,c", "--alpha", "0.75"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("t1"));
    let bad = std::process::Command::new(bin).args(["align", "--alpha", "2"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}
