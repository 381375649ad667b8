//! From passing traces to task instances, one per schedule step.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Config, PipelineError};
use crate::docgen::{check_leakage, generate_docstring, generate_document, DocgenError, Provenance, TextGenerator};
use crate::filter::ProjectFilter;
use crate::node::FunctionNode;
use crate::par::bounded_map;
use crate::pysrc::{definition_source, index_sources};
use crate::rdg::{classify, core_coverage, dependency_depth, merge_same_entry, ClassifiedRdg, TestTrace, TraceStatus};
use crate::scheduler::{build_schedule, merge_equivalent, NodeSet, Schedule, ScheduleStep};
use crate::skeleton::{make_partial_codebase, BaseSnapshot};
use crate::solutions::patch::LineKind;
use crate::solutions::{apply_patch, apply_replace, make_patch, parse_patch, patch_to_replace, ReplaceSolution};
use crate::tokenize::{tokenizer_by_name, Tokenizer};
use crate::tree::{tree_digest, FileTree};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceStats {
    pub num_files: usize,
    pub num_functions: usize,
    pub context_tokens: usize,
    pub patch_tokens: usize,
    pub dep_depth: usize,
}

/// One development step as a self-contained task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskInstance {
    pub instance_id: String,
    pub project: String,
    pub commit: String,
    pub step_index: usize,
    pub task_document: String,
    pub test_ids: Vec<String>,
    /// Diff from the recorded commit to the partial codebase.
    pub skeleton_patch: String,
    /// Diff from the partial codebase back to the commit.
    pub gt_patch: String,
    pub gt_replace: ReplaceSolution,
    pub context_files: Vec<String>,
    pub stats: InstanceStats,
    pub provenance: Provenance,
}

pub fn instance_id(project: &str, step_index: usize) -> String {
    format!("{project}__step-{step_index}")
}

/// Project part of an instance id.
pub fn project_of(instance_id: &str) -> &str {
    instance_id.rsplit_once("__step-").map_or(instance_id, |(p, _)| p)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFailure {
    pub step_index: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub commit: String,
    /// Passing tests that reach no core function.
    pub empty_coverage_tests: Vec<String>,
    /// Test entries the scheduler could not place.
    pub dropped_entries: Vec<Vec<String>>,
    pub step_errors: Vec<StepFailure>,
    pub leakage_drops: Vec<StepFailure>,
    /// Traced tests that did not pass, with their status.
    #[serde(default)]
    pub excluded_tests: Vec<(String, TraceStatus)>,
    #[serde(default)]
    pub trace_failures: Vec<super::TraceFailure>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub schedule: Schedule,
    pub instances: Vec<TaskInstance>,
    pub report: SynthesisReport,
}

/// Graph data of one test entry after its traces were merged.
struct EntryInfo {
    rdg: ClassifiedRdg,
    test_ids: Vec<String>,
    depth: usize,
}

fn entries_from_traces(
    traces: &[TestTrace],
    filter: &ProjectFilter,
) -> (BTreeMap<FunctionNode, EntryInfo>, Vec<String>) {
    let mut by_entry: BTreeMap<FunctionNode, Vec<TestTrace>> = BTreeMap::new();
    for t in traces.iter().filter(|t| t.status == TraceStatus::Passed) {
        by_entry.entry(t.entry().clone()).or_default().push(t.clone());
    }
    let mut out = BTreeMap::new();
    let mut empty = Vec::new();
    for (entry, mut group) in by_entry {
        group.sort_by(|a, b| a.test_id.cmp(&b.test_id));
        let merged = merge_same_entry(&group).expect("grouped by entry");
        let rdg = classify(&merged, filter);
        let test_ids: Vec<String> = group.iter().map(|t| t.test_id.clone()).collect();
        if core_coverage(&rdg).is_empty() {
            empty.extend(test_ids);
            continue;
        }
        let depth = group
            .iter()
            .map(|t| dependency_depth(&classify(t, filter)))
            .max()
            .unwrap_or(0);
        out.insert(entry, EntryInfo { rdg, test_ids, depth });
    }
    empty.sort();
    (out, empty)
}

enum StepOutcome {
    Built(Box<TaskInstance>),
    Failed(String),
    Leaked(String),
}

struct StepContext<'a> {
    config: &'a Config,
    tree: &'a FileTree,
    commit: &'a str,
    repo: &'a Path,
    entries: &'a BTreeMap<FunctionNode, EntryInfo>,
    client: Option<&'a dyn TextGenerator>,
    tokenizer: &'a dyn Tokenizer,
}

fn function_sources(tree: &FileTree, nodes: &NodeSet) -> Result<Vec<(FunctionNode, String)>, String> {
    let index = index_sources(tree, nodes).map_err(|e| e.to_string())?;
    nodes
        .iter()
        .map(|n| {
            let span = index.get(n).ok_or_else(|| format!("{n} not indexed"))?;
            let text = tree.get(&n.filepath).ok_or_else(|| format!("{} missing", n.filepath))?;
            Ok((n.clone(), definition_source(text, span)))
        })
        .collect()
}

fn build_step(ctx: &StepContext<'_>, step: &ScheduleStep) -> StepOutcome {
    match try_build_step(ctx, step) {
        Ok(i) => StepOutcome::Built(Box::new(i)),
        Err(StepError::Leak(m)) => StepOutcome::Leaked(m),
        Err(StepError::Other(m)) => StepOutcome::Failed(m),
    }
}

enum StepError {
    Leak(String),
    Other(String),
}

impl<E: ToString> From<E> for StepError {
    fn from(e: E) -> Self {
        StepError::Other(e.to_string())
    }
}

/// Whether `name` occurs in `text` as a whole identifier.
fn mentions(text: &str, name: &str) -> bool {
    let ident = |c: char| c.is_alphanumeric() || c == '_';
    text.match_indices(name).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + name.len()..].chars().next();
        !before.is_some_and(ident) && !after.is_some_and(ident)
    })
}

fn try_build_step(ctx: &StepContext<'_>, step: &ScheduleStep) -> Result<TaskInstance, StepError> {
    let dg = &ctx.config.docgen;
    let mut notes = Vec::new();

    let mut docs = BTreeMap::new();
    for (node, src) in function_sources(ctx.tree, &step.new_tcfns)? {
        let g = generate_docstring(&src, ctx.client, dg.allow_fallback, dg.max_length)?;
        notes.push(format!(
            "docstring {node}: {} {}",
            g.provenance.generator, g.provenance.prompt_hash
        ));
        notes.extend(g.provenance.notes.iter().map(|n| format!("docstring {node}: {n}")));
        docs.insert(node, g.text);
    }

    let base = BaseSnapshot {
        commit: ctx.commit.to_string(),
        root: ctx.repo.to_path_buf(),
    };
    let partial = make_partial_codebase(ctx.tree, base, step, &docs)?;
    let context_files: Vec<String> = partial.edits.iter().map(|e| e.path.clone()).collect();
    let original = ctx.tree.subset(context_files.iter().map(String::as_str));
    let skeleton = partial.apply_to(&original);
    for node in &step.new_dcfns {
        if skeleton
            .get(&node.filepath)
            .is_some_and(|text| mentions(text, &node.name))
        {
            notes.push(format!(
                "removed {node} is still referenced in {}; its tests may error rather than fail",
                node.filepath
            ));
        }
    }

    let skeleton_patch = make_patch(&original, &skeleton);
    let gt_patch = make_patch(&skeleton, &original);
    let parsed = parse_patch(&gt_patch)?;
    let (gt_replace, errors) = patch_to_replace(&parsed);
    if let Some(e) = errors.first() {
        return Err(StepError::Other(format!("ground truth not expressible as blocks: {e}")));
    }
    if apply_patch(&skeleton, &gt_patch, true)? != original || apply_replace(&skeleton, &gt_replace)? != original {
        return Err(StepError::Other(
            "ground truth does not restore the original files".into(),
        ));
    }

    let tests = function_sources(ctx.tree, &step.ttfns)?;
    let doc = generate_document(&tests, ctx.client, dg.allow_fallback, dg.max_length)?;
    let added = parsed
        .files
        .iter()
        .flat_map(|f| &f.hunks)
        .flat_map(|h| &h.lines)
        .filter(|l| l.kind == LineKind::Add)
        .map(|l| l.text.as_str());
    if let Err(DocgenError::Leakage(line)) = check_leakage(&doc.text, added) {
        return Err(StepError::Leak(format!(
            "task document contains ground-truth line {line:?}"
        )));
    }
    notes.extend(doc.provenance.notes.iter().cloned());

    let mut test_ids = BTreeSet::new();
    let mut dep_depth = 0;
    for t in &step.ttfns {
        let info = ctx.entries.get(t).ok_or_else(|| format!("no traces for {t}"))?;
        test_ids.extend(info.test_ids.iter().cloned());
        dep_depth = dep_depth.max(info.depth);
    }
    let context_tokens = skeleton.iter().map(|(_, text)| ctx.tokenizer.count(text)).sum();
    Ok(TaskInstance {
        instance_id: instance_id(&ctx.config.project, step.step_index),
        project: ctx.config.project.clone(),
        commit: ctx.commit.to_string(),
        step_index: step.step_index,
        task_document: doc.text,
        test_ids: test_ids.into_iter().collect(),
        stats: InstanceStats {
            num_files: context_files.len(),
            num_functions: step.new_tcfns.len() + step.new_dcfns.len(),
            context_tokens,
            patch_tokens: ctx.tokenizer.count(&gt_patch),
            dep_depth,
        },
        skeleton_patch,
        gt_patch,
        gt_replace,
        context_files,
        provenance: Provenance {
            prompt_hash: doc.provenance.prompt_hash,
            generator: doc.provenance.generator,
            notes,
        },
    })
}

type Plan = (BTreeMap<FunctionNode, EntryInfo>, Vec<String>, Schedule);

fn plan(repo: &Path, traces: &[TestTrace], config: &Config) -> Result<Plan, PipelineError> {
    let filter = ProjectFilter::new(repo, config.filter.clone())?;
    let (entries, empty_coverage_tests) = entries_from_traces(traces, &filter);
    let pairs: Vec<(FunctionNode, NodeSet)> = entries
        .iter()
        .map(|(e, i)| (e.clone(), core_coverage(&i.rdg)))
        .collect();
    let merged = merge_equivalent(&pairs)?;
    let rdgs: BTreeMap<FunctionNode, ClassifiedRdg> = entries.iter().map(|(e, i)| (e.clone(), i.rdg.clone())).collect();
    let schedule = build_schedule(&merged, &rdgs)?;
    Ok((entries, empty_coverage_tests, schedule))
}

/// The development schedule of passing traces, without building instances.
pub fn schedule_traces(repo: &Path, traces: &[TestTrace], config: &Config) -> Result<Schedule, PipelineError> {
    plan(repo, traces, config).map(|(_, _, s)| s)
}

/// Builds the schedule from passing traces and one instance per step, in
/// step order. A failing step is reported and never affects the others.
pub fn synthesize(
    repo: &Path,
    traces: &[TestTrace],
    config: &Config,
    client: Option<&dyn TextGenerator>,
) -> Result<Synthesis, PipelineError> {
    let (entries, empty_coverage_tests, schedule) = plan(repo, traces, config)?;

    let tree = FileTree::load_dir(repo).map_err(|source| PipelineError::Io {
        path: repo.to_path_buf(),
        source,
    })?;
    let commit = match &config.commit {
        Some(c) => c.clone(),
        None => tree_digest(repo).map_err(|source| PipelineError::Io {
            path: repo.to_path_buf(),
            source,
        })?,
    };
    let tokenizer = tokenizer_by_name(&config.tokenizer).ok_or_else(|| {
        PipelineError::Config(super::ConfigError::Invalid(format!(
            "unknown tokenizer {}",
            config.tokenizer
        )))
    })?;
    let ctx = StepContext {
        config,
        tree: &tree,
        commit: &commit,
        repo,
        entries: &entries,
        client,
        tokenizer: tokenizer.as_ref(),
    };
    let outcomes = bounded_map(&schedule.steps, config.docgen.max_in_flight, |s| build_step(&ctx, s));

    let mut report = SynthesisReport {
        commit: commit.clone(),
        empty_coverage_tests,
        dropped_entries: schedule
            .dropped
            .iter()
            .map(|e| e.ttfns.iter().flat_map(|t| entries[t].test_ids.clone()).collect())
            .collect(),
        ..Default::default()
    };
    let mut instances = Vec::new();
    for (step, outcome) in schedule.steps.iter().zip(outcomes) {
        let fail = |error: String| StepFailure {
            step_index: step.step_index,
            error,
        };
        match outcome {
            StepOutcome::Built(i) => instances.push(*i),
            StepOutcome::Failed(e) => {
                log::warn!("step {} failed: {e}", step.step_index);
                report.step_errors.push(fail(e));
            }
            StepOutcome::Leaked(e) => {
                log::warn!("step {} dropped: {e}", step.step_index);
                report.leakage_drops.push(fail(e));
            }
        }
    }
    Ok(Synthesis {
        schedule,
        instances,
        report,
    })
}
