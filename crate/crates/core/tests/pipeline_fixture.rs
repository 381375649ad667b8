mod common;

use std::collections::BTreeSet;
use std::fs;

use tddsynth_core::pipeline::dataset::{load_instances, SCHEDULE_FILE};
use tddsynth_core::pipeline::{compute_stats, make_lite_split, Tier};
use tddsynth_core::solutions::parse_patch;
use tddsynth_core::{FunctionNode, Schedule, TraceStatus};

fn names(set: &BTreeSet<FunctionNode>) -> Vec<&str> {
    let mut v: Vec<&str> = set.iter().map(|n| n.name.as_str()).collect();
    v.sort_unstable();
    v
}

#[test]
fn schedule_matches_hand_derivation() {
    let out = tempfile::tempdir().unwrap();
    let run = common::fixture_run(out.path(), 4);
    type Row = (
        &'static [&'static str],
        &'static [&'static str],
        &'static [&'static str],
        usize,
    );
    let expected: &[Row] = &[
        (&["test_add"], &["add"], &[], 1),
        (&["test_mul", "test_mul_identity"], &["mul"], &[], 1),
        (&["test_add_mul", "test_is_digit"], &["is_digit"], &[], 1),
        (&["test_power"], &["power"], &[], 2),
        (&["test_square"], &["square"], &[], 2),
        (&["test_tokenize"], &["tokenize"], &[], 2),
        (&["test_format_result"], &["format_result"], &["_group", "absolute"], 2),
        (&["test_evaluate"], &["evaluate"], &["__init__", "_product", "_sum"], 4),
    ];
    let steps = &run.synthesis.schedule.steps;
    assert_eq!(steps.len(), expected.len());
    for (s, (tt, tc, dc, depth)) in steps.iter().zip(expected) {
        assert_eq!(names(&s.ttfns), *tt, "step {}", s.step_index);
        assert_eq!(names(&s.new_tcfns), *tc, "step {}", s.step_index);
        assert_eq!(names(&s.new_dcfns), *dc, "step {}", s.step_index);
        let inst = &run.synthesis.instances[s.step_index - 1];
        assert_eq!(inst.stats.dep_depth, *depth, "step {}", s.step_index);
    }

    let written = fs::read_to_string(run.project_dir.join(SCHEDULE_FILE)).unwrap();
    assert_eq!(Schedule::from_json(&written).unwrap().to_json(), written);
    assert_eq!(run.synthesis.schedule.to_json(), written);
}

#[test]
fn failing_test_is_traced_but_not_scheduled() {
    let out = tempfile::tempdir().unwrap();
    let run = common::fixture_run(out.path(), 2);
    let history = "tests/test_evaluator.py::test_history";
    assert_eq!(
        run.synthesis.report.excluded_tests,
        vec![(history.to_string(), TraceStatus::Failed)]
    );
    assert_eq!(fs::read_dir(run.project_dir.join("traces")).unwrap().count(), 12);
    assert!(run
        .synthesis
        .instances
        .iter()
        .all(|i| !i.test_ids.iter().any(|t| t == history)));
    let all: usize = run.synthesis.instances.iter().map(|i| i.test_ids.len()).sum();
    assert_eq!(all, 11);
}

#[test]
fn instances_satisfy_their_invariants() {
    let out = tempfile::tempdir().unwrap();
    let run = common::fixture_run(out.path(), 4);
    let ids: Vec<&str> = run.synthesis.instances.iter().map(|i| i.instance_id.as_str()).collect();
    let want: Vec<String> = (1..=8).map(|i| format!("minicalc__step-{i}")).collect();
    assert_eq!(ids, want);

    for (inst, step) in run.synthesis.instances.iter().zip(&run.synthesis.schedule.steps) {
        assert_eq!(inst.stats.num_functions, step.new_tcfns.len() + step.new_dcfns.len());
        assert_eq!(inst.stats.num_files, inst.context_files.len());
        let touched: BTreeSet<String> = parse_patch(&inst.gt_patch)
            .unwrap()
            .files
            .iter()
            .map(|f| f.path().to_string())
            .collect();
        assert_eq!(touched, inst.context_files.iter().cloned().collect());
        assert_eq!(inst.provenance.generator, "fallback");
        assert!(inst.provenance.prompt_hash.starts_with("sha256:"));
        assert!(!inst.task_document.is_empty());
    }
    assert_eq!(
        run.synthesis.instances[6].context_files,
        ["minicalc/arith.py", "minicalc/fmt.py"]
    );
}

#[test]
fn stats_recompute_from_disk_and_split() {
    let out = tempfile::tempdir().unwrap();
    let run = common::fixture_run(out.path(), 4);
    let loaded = load_instances(&run.project_dir).unwrap();
    assert_eq!(loaded, run.synthesis.instances);
    let stats = compute_stats(&loaded, "whitespace");
    assert_eq!(stats, run.stats);
    let p = &stats.projects["minicalc"];
    assert_eq!(p.steps, 8);
    assert_eq!(p.avg_functions, 13.0 / 8.0);
    assert_eq!(p.tier, Tier::Easy);
    assert_eq!(make_lite_split(&loaded, 5).len(), 5);
    assert_eq!(make_lite_split(&loaded, 50).len(), 8);
}

#[test]
fn parallelism_does_not_change_the_dataset() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = common::fixture_run(a.path(), 1);
    let rb = common::fixture_run(b.path(), 4);
    assert_eq!(common::dir_bytes(&ra.project_dir), common::dir_bytes(&rb.project_dir));
}
