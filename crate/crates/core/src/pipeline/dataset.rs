//! Dataset directories: `<out>/<project>/{instances/, stats.json,
//! schedule.json, synthesis_report.json, traces/}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{DatasetStats, PipelineError, Synthesis, TaskInstance};

pub const INSTANCES_DIR: &str = "instances";
pub const TRACES_DIR: &str = "traces";
pub const STATS_FILE: &str = "stats.json";
pub const SCHEDULE_FILE: &str = "schedule.json";
pub const REPORT_FILE: &str = "synthesis_report.json";
pub const SPLITS_DIR: &str = "splits";

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON with a trailing newline, the encoding of every dataset file.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    fs::write(path, text).map_err(io_error(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn instance_path(project_dir: &Path, instance_id: &str) -> PathBuf {
    project_dir.join(INSTANCES_DIR).join(format!("{instance_id}.json"))
}

/// Writes instances, schedule, stats and report, replacing earlier instances.
pub fn write_dataset(project_dir: &Path, synthesis: &Synthesis, stats: &DatasetStats) -> Result<(), PipelineError> {
    let inst_dir = project_dir.join(INSTANCES_DIR);
    if inst_dir.exists() {
        fs::remove_dir_all(&inst_dir).map_err(io_error(&inst_dir))?;
    }
    fs::create_dir_all(&inst_dir).map_err(io_error(&inst_dir))?;
    for i in &synthesis.instances {
        write_file(&instance_path(project_dir, &i.instance_id), &to_json(i))?;
    }
    write_file(&project_dir.join(SCHEDULE_FILE), &synthesis.schedule.to_json())?;
    write_file(&project_dir.join(STATS_FILE), &stats.to_json())?;
    write_file(&project_dir.join(REPORT_FILE), &to_json(&synthesis.report))
}

pub fn read_instance(path: &Path) -> Result<TaskInstance, PipelineError> {
    read_json(path)
}

/// Every instance under `project_dir`, in step order.
pub fn load_instances(project_dir: &Path) -> Result<Vec<TaskInstance>, PipelineError> {
    let dir = project_dir.join(INSTANCES_DIR);
    let mut out = Vec::new();
    for entry in fs::read_dir(&dir).map_err(io_error(&dir))? {
        let path = entry.map_err(io_error(&dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(read_instance(&path)?);
        }
    }
    out.sort_by(|a, b| (&a.project, a.step_index).cmp(&(&b.project, b.step_index)));
    Ok(out)
}
