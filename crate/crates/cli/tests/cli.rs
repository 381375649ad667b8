//! End-to-end runs of the `tddsynth` binary on the bundled fixture.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/minicalc")
}

fn tddsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tddsynth"))
        .args(args)
        .output()
        .unwrap()
}

fn fixture_args(out: &std::path::Path) -> Vec<String> {
    let f = fixture();
    vec![
        "--config".into(),
        f.join("config.toml").to_string_lossy().into_owned(),
        "--out".into(),
        out.to_string_lossy().into_owned(),
        "--fixture-traces".into(),
        f.join("traces").to_string_lossy().into_owned(),
    ]
}

fn with<'a>(base: &'a [String], extra: &[&'a str]) -> Vec<&'a str> {
    extra.iter().copied().chain(base.iter().map(String::as_str)).collect()
}

#[test]
fn schedule_from_fixture_traces() {
    let out = tempfile::tempdir().unwrap();
    let base = fixture_args(out.path());
    let traces = fixture().join("traces");
    let traces = traces.to_string_lossy();
    let o = tddsynth(&with(&base, &["schedule", "--traces", &traces]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("8 steps written"), "{stdout}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("minicalc/schedule.json")).unwrap()).unwrap();
    assert_eq!(doc["steps"].as_array().unwrap().len(), 8);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(tddsynth(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tddsynth(&["split", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one_with_json() {
    let o = tddsynth(&["eval", "score", "--results", "/nonexistent/results.json"]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("results.json"));
}

#[test]
fn score_reports_three_of_five() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<serde_json::Value> = (0..5)
        .map(|i| serde_json::json!({"instance_id": format!("p__step-{}", i + 1), "applied": true, "passed": i < 3}))
        .collect();
    let bare = dir.path().join("bare.json");
    std::fs::write(&bare, serde_json::to_string(&rows).unwrap()).unwrap();
    let wrapped = dir.path().join("wrapped.json");
    std::fs::write(&wrapped, serde_json::json!({ "results": rows }).to_string()).unwrap();
    for p in [bare, wrapped] {
        let o = tddsynth(&["eval", "score", "--results", &p.to_string_lossy()]);
        assert!(o.status.success());
        assert_eq!(
            String::from_utf8_lossy(&o.stdout).lines().next(),
            Some("pass rate 0.600 (3/5)")
        );
    }
}

#[test]
fn synthesize_split_and_materialize() {
    let out = tempfile::tempdir().unwrap();
    let base = fixture_args(out.path());
    let o = tddsynth(&with(&base, &["synthesize", "--jobs", "2"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = tddsynth(&with(&base, &["split", "--lite", "--lite-n", "3"]));
    assert!(o.status.success());
    let lite: Vec<String> =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("minicalc/splits/lite.json")).unwrap()).unwrap();
    assert_eq!(lite, ["minicalc__step-1", "minicalc__step-2", "minicalc__step-3"]);

    let dest = out.path().join("partial");
    let o = tddsynth(&with(
        &base,
        &["materialize", "minicalc__step-1", "--dest", &dest.to_string_lossy()],
    ));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let arith = std::fs::read_to_string(dest.join("minicalc/arith.py")).unwrap();
    assert!(arith.contains("raise NotImplementedError"));
}

#[test]
fn effective_config_printed_when_very_verbose() {
    let out = tempfile::tempdir().unwrap();
    let base = fixture_args(out.path());
    let o = tddsynth(&with(&base, &["collect-tests", "-vv", "--set", "jobs=3"]));
    assert!(o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("# effective configuration") && err.contains("jobs = 3"),
        "{err}"
    );
}
