//! End-to-end smoke tests for the compiled binary and its exit codes.

use std::path::Path;
use std::process::Command;

use diasim::fixtures::sample_emrs;
use diasim::formats::{read_corpus, read_manifest, write_emrs};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diasim"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let output = bin().args(args).output().expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn full_pipeline_exits_zero_at_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let emrs_path = dir.path().join("emrs.json");
    write_emrs(&emrs_path, &sample_emrs(1)).unwrap();
    let out_dir = dir.path().join("corpus");

    let (code, _, err) = run(&["validate", "--emrs", &path_str(&emrs_path)]);
    assert_eq!(code, 0, "validate: {err}");

    let (code, _, err) = run(&[
        "generate",
        "--out",
        &path_str(&out_dir),
        "--emrs",
        &path_str(&emrs_path),
        "--seed",
        "7",
        "--feds-per-emr",
        "2",
    ]);
    assert_eq!(code, 0, "generate: {err}");

    let corpus = out_dir.join("corpus.jsonl");
    let manifest = read_manifest(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.session_count, 6 * 2 * 2);
    assert_eq!(read_corpus(&corpus).unwrap().len(), manifest.session_count);

    let report_path = dir.path().join("report.json");
    let (code, _, err) = run(&[
        "eval",
        "--corpus",
        &path_str(&corpus),
        "--emrs",
        &path_str(&emrs_path),
        "--out",
        &path_str(&report_path),
    ]);
    assert_eq!(code, 0, "eval: {err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["subset_accuracy"], 1.0);

    let (code, stdout, err) = run(&["stats", "--corpus", &path_str(&corpus), "--diversity"]);
    assert_eq!(code, 0, "stats: {err}");
    let stats: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(stats["session_count"], manifest.session_count);
    assert!(stats["diversity"]["normalized_entropy"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_two() {
    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["generate"]); // missing --out
    assert_eq!(code, 2);
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&[
        "generate",
        "--out",
        &path_str(&dir.path().join("x")),
        "--strategies",
        "bogus",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn missing_files_exit_three() {
    let (code, _, _) = run(&["eval", "--corpus", "/nonexistent/corpus.jsonl"]);
    assert_eq!(code, 3);
    let (code, _, _) = run(&["validate", "--emrs", "/nonexistent/emrs.json"]);
    assert_eq!(code, 3);
}

#[test]
fn invalid_records_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let emrs_path = dir.path().join("emrs.json");
    let mut emrs = sample_emrs(1);
    emrs[0].chief_complaint = String::new();
    write_emrs(&emrs_path, &emrs).unwrap();
    let (code, _, err) = run(&["validate", "--emrs", &path_str(&emrs_path)]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("chief_complaint"));
}

#[test]
fn unreachable_remote_backend_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("backend.json");
    std::fs::write(
        &config_path,
        r#"{"endpoint":"http://127.0.0.1:1/v1/chat/completions","model":"m","auth_env":"X","timeout_s":1,"max_retries":0,"backoff_initial_ms":1,"backoff_mult":1.0,"max_concurrent":1}"#,
    )
    .unwrap();
    let (code, _, err) = run(&[
        "generate",
        "--out",
        &path_str(&dir.path().join("out")),
        "--backend",
        "remote",
        "--config",
        &path_str(&config_path),
    ]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn help_and_version_exit_zero() {
    let (code, stdout, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("generate"));
    let (code, _, _) = run(&["--version"]);
    assert_eq!(code, 0);
}
