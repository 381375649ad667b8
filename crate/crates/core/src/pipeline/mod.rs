//! End-to-end synthesis: collect tests, trace them, schedule, build task
//! instances and write the dataset.

pub mod collect;
pub mod config;
pub mod dataset;
pub mod stats;
pub mod synth;
pub mod traces;

use std::fs;
use std::path::{Path, PathBuf};

pub use collect::collect_tests;
pub use config::{Config, ConfigError, DocgenConfig, DocgenMode};
pub use stats::{compute_stats, make_lite_split, tier_for, DatasetStats, ProjectStats, Tier};
pub use synth::{
    instance_id, project_of, schedule_traces, synthesize, InstanceStats, StepFailure, Synthesis, SynthesisReport,
    TaskInstance,
};
pub use traces::{fixture_test_ids, read_trace_dir, run_traces, trace_file_name, TraceBatch, TraceFailure, TraceMode};

use crate::docgen::{DocgenError, HttpGenerator, TextGenerator};
use crate::filter::FilterError;
use crate::rdg::TraceError;
use crate::scheduler::ScheduleError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("test collection `{command}` failed (exit {code:?}): {output}")]
    CollectionFailed {
        command: String,
        code: Option<i32>,
        output: String,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Docgen(#[from] DocgenError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// The generation client the config asks for, if any.
pub fn client_for(config: &Config) -> Result<Option<HttpGenerator>, DocgenError> {
    match config.docgen.mode {
        DocgenMode::Fallback => Ok(None),
        DocgenMode::Service => HttpGenerator::from_env().map(Some),
    }
}

#[derive(Debug)]
pub struct PipelineRun {
    pub project_dir: PathBuf,
    pub synthesis: Synthesis,
    pub stats: DatasetStats,
}

/// Collects (or, in fixture mode, reads) test ids, traces them, synthesizes
/// and writes `<out>/<project>/`.
pub fn run_pipeline(
    config: &Config,
    out: &Path,
    mode: &TraceMode,
    jobs: usize,
    client: Option<&dyn TextGenerator>,
) -> Result<PipelineRun, PipelineError> {
    let project_dir = out.join(&config.project);
    let test_ids = match mode {
        TraceMode::Fixture(dir) => fixture_test_ids(dir)?,
        TraceMode::Shim(_) => collect_tests(&config.repo, config)?,
    };
    let traces_dir = project_dir.join(dataset::TRACES_DIR);
    if traces_dir.exists() {
        fs::remove_dir_all(&traces_dir).map_err(dataset::io_error(&traces_dir))?;
    }
    let batch = run_traces(&config.repo, &test_ids, config, mode, &traces_dir, jobs)?;
    let mut synthesis = synthesize(&config.repo, &batch.forwarded, config, client)?;
    synthesis.report.excluded_tests = batch.excluded;
    synthesis.report.trace_failures = batch.failures;
    let stats = compute_stats(&synthesis.instances, &config.tokenizer);
    dataset::write_dataset(&project_dir, &synthesis, &stats)?;
    Ok(PipelineRun {
        project_dir,
        synthesis,
        stats,
    })
}
