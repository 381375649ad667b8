//! Evaluation of candidate solutions: materialize the partial codebase,
//! apply the solution in a scratch copy, run the step's tests.

pub mod metrics;
pub mod prompt;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use metrics::{build_report, efficiency_value, pass_rate, EvalReport, MetricError, PassRate, ReportRow};
pub use prompt::{build_prompt, Prompt};

use crate::pipeline::TaskInstance;
use crate::proc::{expand_template, run_command};
use crate::solutions::{apply_patch, apply_solution, Solution};
use crate::tree::{copy_dir, tree_digest, FileTree};

/// Upper bound on recorded iterations when none is configured.
pub const DEFAULT_MAX_ITERATIONS: u32 = 30;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot materialize partial codebase: {0}")]
    MaterializationFailed(String),
    #[error("sandbox {path}: {source}")]
    Sandbox { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalResult {
    pub instance_id: String,
    pub applied: bool,
    #[serde(default)]
    pub apply_error: Option<String>,
    #[serde(default)]
    pub tests_run: usize,
    pub passed: bool,
    #[serde(default)]
    pub iterations: Option<u32>,
    #[serde(default)]
    pub wall_time_secs: f64,
    #[serde(default)]
    pub output_digest: Option<String>,
    #[serde(default)]
    pub timed_out: bool,
    #[serde(default)]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunnerConfig {
    /// Checkout at the instance's recorded commit; never modified.
    pub repo: PathBuf,
    /// Template with `{repo_root}` and `{test_ids}` placeholders.
    pub test_command: String,
    pub timeout: Duration,
    /// Tests run in addition to the instance's own (regression mode).
    pub extra_test_ids: Vec<String>,
}

/// The partial codebase of `instance`: the checkout with the skeleton patch
/// applied. Fails if the checkout is not the recorded revision.
pub fn materialize(instance: &TaskInstance, repo: &Path) -> Result<FileTree, EvalError> {
    let fail = |m: String| EvalError::MaterializationFailed(format!("{}: {m}", instance.instance_id));
    if instance.commit.starts_with("tree-sha256:") {
        let digest = tree_digest(repo).map_err(|e| fail(format!("{}: {e}", repo.display())))?;
        if digest != instance.commit {
            return Err(fail(format!(
                "checkout is {digest}, instance needs {}",
                instance.commit
            )));
        }
    }
    let tree = FileTree::load_dir(repo).map_err(|e| fail(format!("{}: {e}", repo.display())))?;
    apply_patch(&tree, &instance.skeleton_patch, true).map_err(|e| fail(e.to_string()))
}

/// Writes every file of `to` that differs from `from` under `root`, and
/// deletes files `to` no longer has.
fn sync_changes(root: &Path, from: &FileTree, to: &FileTree) -> std::io::Result<()> {
    let changed: FileTree = to
        .iter()
        .filter(|(p, c)| from.get(p) != Some(*c))
        .map(|(p, c)| (p.to_string(), c.to_string()))
        .collect();
    changed.write_to(root)?;
    for p in from.paths().filter(|p| !to.contains(p)) {
        fs::remove_file(root.join(p))?;
    }
    Ok(())
}

/// Copies the checkout to `dest` and turns it into the partial codebase.
pub fn materialize_into(instance: &TaskInstance, repo: &Path, dest: &Path) -> Result<FileTree, EvalError> {
    let partial = materialize(instance, repo)?;
    let original = FileTree::load_dir(repo).map_err(|e| EvalError::MaterializationFailed(e.to_string()))?;
    let sandbox = |source| EvalError::Sandbox {
        path: dest.to_path_buf(),
        source,
    };
    copy_dir(repo, dest).map_err(sandbox)?;
    sync_changes(dest, &original, &partial).map_err(sandbox)?;
    Ok(partial)
}

/// Applies `solution` to a fresh copy of the partial codebase and runs the
/// instance's tests there. Apply failures and timeouts are reported in the
/// result; only sandbox setup problems are errors.
pub fn evaluate_solution(
    instance: &TaskInstance,
    solution: &Solution,
    runner: &RunnerConfig,
) -> Result<EvalResult, EvalError> {
    let dir = tempfile::Builder::new()
        .prefix("tddsynth-eval-")
        .tempdir()
        .map_err(|source| EvalError::Sandbox {
            path: std::env::temp_dir(),
            source,
        })?;
    let root = dir.path().join("repo");
    let partial = materialize_into(instance, &runner.repo, &root)?;

    let mut result = EvalResult {
        instance_id: instance.instance_id.clone(),
        applied: false,
        apply_error: None,
        tests_run: 0,
        passed: false,
        iterations: None,
        wall_time_secs: 0.0,
        output_digest: None,
        timed_out: false,
        diagnostic: None,
    };
    let edited = match apply_solution(&partial, solution) {
        Ok(t) => t,
        Err(e) => {
            result.apply_error = Some(e.to_string());
            return Ok(result);
        }
    };
    result.applied = true;
    sync_changes(&root, &partial, &edited).map_err(|source| EvalError::Sandbox {
        path: root.clone(),
        source,
    })?;

    let mut ids = instance.test_ids.clone();
    ids.extend(runner.extra_test_ids.iter().cloned());
    result.tests_run = ids.len();
    let argv = match expand_template(&runner.test_command, &root, &ids) {
        Ok(a) => a,
        Err(e) => {
            result.diagnostic = Some(e);
            return Ok(result);
        }
    };
    match run_command(&argv, &root, &[("PYTHONDONTWRITEBYTECODE", "1")], runner.timeout) {
        Ok(out) => {
            result.passed = out.success();
            result.timed_out = out.timed_out;
            result.wall_time_secs = out.wall_time.as_secs_f64();
            result.output_digest = Some(out.digest());
            if out.timed_out {
                result.diagnostic = Some(format!("timed out after {} s", runner.timeout.as_secs()));
            }
        }
        Err(e) => result.diagnostic = Some(format!("cannot run {}: {e}", argv[0])),
    }
    Ok(result)
}
