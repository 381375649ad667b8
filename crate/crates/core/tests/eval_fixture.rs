mod common;

use std::fs;
use std::time::Duration;

use tddsynth_core::eval::{build_prompt, evaluate_solution, materialize, EvalError, RunnerConfig};
use tddsynth_core::pipeline::TaskInstance;
use tddsynth_core::solutions::{ReplaceBlock, ReplaceSolution, Solution, SolutionFormat};

fn runner() -> RunnerConfig {
    let cfg = common::fixture_config();
    RunnerConfig {
        repo: cfg.repo.clone(),
        test_command: cfg.test_command.clone(),
        timeout: Duration::from_secs(120),
        extra_test_ids: Vec::new(),
    }
}

fn instances() -> (tempfile::TempDir, Vec<TaskInstance>) {
    let out = tempfile::tempdir().unwrap();
    let run = common::fixture_run(out.path(), 4);
    (out, run.synthesis.instances)
}

#[test]
fn red_then_green_for_every_step() {
    if !common::pytest_available() {
        eprintln!("skipping: python3 -m pytest is not available");
        return;
    }
    let (_out, instances) = instances();
    let r = runner();
    for inst in &instances {
        let red = evaluate_solution(inst, &Solution::empty(SolutionFormat::Replace), &r).unwrap();
        assert!(
            red.applied && !red.passed,
            "{} passes without a solution",
            inst.instance_id
        );
        let green = evaluate_solution(inst, &Solution::Replace(inst.gt_replace.clone()), &r).unwrap();
        assert!(
            green.applied && green.passed,
            "{} fails with its ground truth: {green:?}",
            inst.instance_id
        );
        assert_eq!(green.tests_run, inst.test_ids.len());
    }
}

#[test]
fn ground_truth_patch_and_repeat_evaluations_agree() {
    if !common::pytest_available() {
        eprintln!("skipping: python3 -m pytest is not available");
        return;
    }
    let (_out, instances) = instances();
    let inst = &instances[6];
    let r = runner();
    let a = evaluate_solution(inst, &Solution::Patch(inst.gt_patch.clone()), &r).unwrap();
    let b = evaluate_solution(inst, &Solution::Patch(inst.gt_patch.clone()), &r).unwrap();
    assert!(a.passed && b.passed);
}

#[test]
fn apply_errors_are_recorded_not_raised() {
    let (_out, instances) = instances();
    let bad = Solution::Replace(ReplaceSolution {
        blocks: vec![ReplaceBlock {
            filepath: "minicalc/arith.py".into(),
            search: "this text is nowhere\n".into(),
            replace: "x\n".into(),
        }],
    });
    let res = evaluate_solution(&instances[0], &bad, &runner()).unwrap();
    assert!(!res.applied && !res.passed);
    assert!(res.apply_error.unwrap().contains("search text not found"));
}

#[test]
fn source_checkout_is_never_touched() {
    let before = common::dir_bytes(&runner().repo);
    let (_out, instances) = instances();
    let _ = evaluate_solution(&instances[0], &Solution::empty(SolutionFormat::Patch), &runner()).unwrap();
    let _ = materialize(&instances[0], &runner().repo).unwrap();
    let mut after = common::dir_bytes(&runner().repo);
    after.retain(|k, _| !k.contains("__pycache__") && !k.contains(".pytest_cache"));
    assert_eq!(before.len(), after.len());
    assert_eq!(before, after);
}

#[test]
fn materialization_checks_the_revision() {
    let (_out, mut instances) = instances();
    let inst = &mut instances[0];
    let partial = materialize(inst, &runner().repo).unwrap();
    assert!(partial
        .get("minicalc/arith.py")
        .unwrap()
        .contains("raise NotImplementedError"));
    inst.commit = format!("tree-sha256:{}", "0".repeat(64));
    assert!(matches!(
        materialize(inst, &runner().repo),
        Err(EvalError::MaterializationFailed(_))
    ));
}

#[test]
fn prompt_matches_committed_snapshot() {
    let (_out, instances) = instances();
    let inst = &instances[0];
    let partial = materialize(inst, &runner().repo).unwrap();
    let snap_dir = common::fixture_dir().join("prompts");
    for format in [SolutionFormat::Replace, SolutionFormat::Patch] {
        let p = build_prompt(inst, &partial, format).unwrap();
        let text = format!("=== system ===\n{}\n=== user ===\n{}", p.system_text, p.user_text);
        let path = snap_dir.join(format!("{}.{format}.txt", inst.instance_id));
        if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
            fs::create_dir_all(&snap_dir).unwrap();
            fs::write(&path, &text).unwrap();
        }
        assert_eq!(fs::read_to_string(&path).unwrap(), text, "{}", path.display());
        assert_eq!(p.user_text.matches("### minicalc/arith.py\n").count(), 1);
    }
    let r = build_prompt(inst, &partial, SolutionFormat::Replace).unwrap();
    let p = build_prompt(inst, &partial, SolutionFormat::Patch).unwrap();
    let strip = |s: &str| {
        s.split("Task:\n\n")
            .nth(1)
            .unwrap()
            .split("\n\nReply")
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(strip(&r.user_text), strip(&p.user_text));

    let mut blank = inst.clone();
    blank.task_document.clear();
    assert!(matches!(
        build_prompt(&blank, &partial, SolutionFormat::Replace),
        Err(EvalError::MaterializationFailed(_))
    ));
}
