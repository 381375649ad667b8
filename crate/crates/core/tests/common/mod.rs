#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::path::PathBuf;

use tddsynth_core::pipeline::{run_pipeline, Config, PipelineRun, TraceMode};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/minicalc")
}

pub fn fixture_config() -> Config {
    Config::load(&fixture_dir().join("config.toml"), &[]).expect("fixture config")
}

pub fn fixture_run(out: &std::path::Path, jobs: usize) -> PipelineRun {
    let cfg = fixture_config();
    run_pipeline(&cfg, out, &TraceMode::Fixture(fixture_dir().join("traces")), jobs, None).expect("pipeline")
}

/// Every file under `root` with its bytes, keyed by relative path.
pub fn dir_bytes(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    walk(root, root)
}

fn walk(root: &std::path::Path, dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(root, &p));
        } else {
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            out.insert(rel, std::fs::read(&p).unwrap());
        }
    }
    out
}

/// Whether `python3 -m pytest` can run here.
pub fn pytest_available() -> bool {
    std::process::Command::new("python3")
        .args(["-m", "pytest", "--version"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}
