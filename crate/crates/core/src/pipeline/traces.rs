//! Per-test trace jobs: either the external tracing shim, one process per
//! test, or pre-recorded trace files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Config, PipelineError};
use crate::par::bounded_map;
use crate::proc::{expand_template, run_command};
use crate::rdg::{parse_trace_file, TestTrace, TraceStatus};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceMode {
    /// Run the tracing shim named by this command.
    Shim(String),
    /// Copy recorded traces from this directory; the shim is never invoked.
    Fixture(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFailure {
    pub test_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct TraceBatch {
    /// Every trace file written, sorted by test id.
    pub written: Vec<PathBuf>,
    /// Parsed traces of passing tests, sorted by test id.
    pub forwarded: Vec<TestTrace>,
    /// Tests traced but not passing; kept on disk for audit.
    pub excluded: Vec<(String, TraceStatus)>,
    pub failures: Vec<TraceFailure>,
}

/// File name of a test's trace: characters outside `[A-Za-z0-9_.-]` become `_`.
pub fn trace_file_name(test_id: &str) -> String {
    let safe: String = test_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Every trace file in `dir`, parsed and sorted by test id.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<TestTrace>, PipelineError> {
    let mut traces = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let t = parse_trace_file(&bytes).map_err(|e| PipelineError::Trace {
                path: path.clone(),
                source: e,
            })?;
            traces.push(t);
        }
    }
    traces.sort_by(|a, b| a.test_id.cmp(&b.test_id));
    Ok(traces)
}

/// Test ids of every recorded trace in `dir`, read from the files.
pub fn fixture_test_ids(dir: &Path) -> Result<Vec<String>, PipelineError> {
    Ok(read_trace_dir(dir)?.into_iter().map(|t| t.test_id).collect())
}

fn trace_one(test_id: &str, repo: &Path, config: &Config, mode: &TraceMode, out_dir: &Path) -> Result<PathBuf, String> {
    let dest = out_dir.join(trace_file_name(test_id));
    match mode {
        TraceMode::Fixture(dir) => {
            let src = dir.join(trace_file_name(test_id));
            fs::copy(&src, &dest).map_err(|e| format!("{}: {e}", src.display()))?;
        }
        TraceMode::Shim(shim) => {
            let mut argv = shlex::split(shim)
                .filter(|v| !v.is_empty())
                .ok_or("cannot split shim command")?;
            argv.extend(
                [
                    "--repo".to_string(),
                    repo.to_string_lossy().into_owned(),
                    "--test-id".into(),
                    test_id.into(),
                    "--out".into(),
                    dest.to_string_lossy().into_owned(),
                    "--".into(),
                ]
                .into_iter()
                .chain(expand_template(&config.test_command, repo, &[test_id.to_string()])?),
            );
            let out = run_command(
                &argv,
                repo,
                &[("PYTHONDONTWRITEBYTECODE", "1")],
                Duration::from_secs(config.timeout_secs),
            )
            .map_err(|e| format!("cannot run {}: {e}", argv[0]))?;
            if out.timed_out {
                return Err(format!("tracer timed out after {} s", config.timeout_secs));
            }
            if out.code != Some(0) {
                return Err(format!("tracer exited with {:?}: {}", out.code, out.combined().trim()));
            }
        }
    }
    Ok(dest)
}

/// Traces every test with at most `jobs` concurrent jobs. A failing job is
/// recorded and never aborts the batch; results do not depend on `jobs`.
pub fn run_traces(
    repo: &Path,
    test_ids: &[String],
    config: &Config,
    mode: &TraceMode,
    out_dir: &Path,
    jobs: usize,
) -> Result<TraceBatch, PipelineError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut ids = test_ids.to_vec();
    ids.sort();
    ids.dedup();
    let results = bounded_map(&ids, jobs, |id| trace_one(id, repo, config, mode, out_dir));

    let mut batch = TraceBatch::default();
    for (id, r) in ids.iter().zip(results) {
        let path = match r {
            Ok(p) => p,
            Err(reason) => {
                batch.failures.push(TraceFailure {
                    test_id: id.clone(),
                    reason,
                });
                continue;
            }
        };
        batch.written.push(path.clone());
        let parsed = fs::read(&path)
            .map_err(|e| e.to_string())
            .and_then(|b| parse_trace_file(&b).map_err(|e| e.to_string()));
        match parsed {
            Ok(t) if &t.test_id != id => batch.failures.push(TraceFailure {
                test_id: id.clone(),
                reason: format!("trace file records test id {:?}", t.test_id),
            }),
            Ok(t) if t.status == TraceStatus::Passed => batch.forwarded.push(t),
            Ok(t) => batch.excluded.push((id.clone(), t.status)),
            Err(reason) => batch.failures.push(TraceFailure {
                test_id: id.clone(),
                reason,
            }),
        }
    }
    Ok(batch)
}
