//! Incremental development schedule.
//!
//! Tests that cover the same core functions are merged, entries are visited
//! in ascending coverage size, and each entry that introduces functions not
//! yet developed becomes a new step. Entries with nothing new fold their
//! tests into the most recent step. The result is topologically ordered: by
//! the time a step's tests run, everything they touch has been developed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::node::FunctionNode;
use crate::rdg::ClassifiedRdg;

pub const SCHEDULE_SCHEMA_VERSION: u32 = 1;

pub type NodeSet = BTreeSet<FunctionNode>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScheduleEntry {
    pub coverage: NodeSet,
    pub ttfns: NodeSet,
}

impl ScheduleEntry {
    /// Visit order: coverage size, then sorted coverage, then sorted tests.
    fn order_key(&self) -> (usize, &NodeSet, &NodeSet) {
        (self.coverage.len(), &self.coverage, &self.ttfns)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStep {
    pub step_index: usize,
    pub ttfns: NodeSet,
    pub new_tcfns: NodeSet,
    pub new_dcfns: NodeSet,
    /// Coverage size of the entry that opened this step. Not serialized.
    #[serde(skip)]
    pub origin_coverage: usize,
}

impl ScheduleStep {
    pub fn new_functions(&self) -> NodeSet {
        self.new_tcfns.union(&self.new_dcfns).cloned().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    pub steps: Vec<ScheduleStep>,
    /// Entries that could not be placed because no step existed yet.
    pub dropped: Vec<ScheduleEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("test entry {0} appears with different coverage sets")]
    DuplicateTtfn(FunctionNode),
    #[error("no classified graph for test entry {0}")]
    MissingRdg(FunctionNode),
    #[error("function {function} in step {step} is not covered by any of the step's graphs")]
    Unresolved { step: usize, function: FunctionNode },
    #[error("malformed schedule document: {0}")]
    Malformed(String),
}

/// Groups tests whose coverage sets are equal. Output is sorted by coverage,
/// then by test set.
pub fn merge_equivalent(entries: &[(FunctionNode, NodeSet)]) -> Result<Vec<ScheduleEntry>, ScheduleError> {
    let mut by_ttfn: BTreeMap<&FunctionNode, &NodeSet> = BTreeMap::new();
    for (ttfn, coverage) in entries {
        if let Some(prev) = by_ttfn.insert(ttfn, coverage) {
            if prev != coverage {
                return Err(ScheduleError::DuplicateTtfn(ttfn.clone()));
            }
        }
    }
    let mut groups: BTreeMap<&NodeSet, NodeSet> = BTreeMap::new();
    for (ttfn, coverage) in by_ttfn {
        groups.entry(coverage).or_default().insert(ttfn.clone());
    }
    Ok(groups
        .into_iter()
        .map(|(coverage, ttfns)| ScheduleEntry {
            coverage: coverage.clone(),
            ttfns,
        })
        .collect())
}

/// Folds merged entries into a development schedule and splits each step's
/// new functions into directly tested targets and their dependents.
pub fn build_schedule(
    entries: &[ScheduleEntry],
    rdgs: &BTreeMap<FunctionNode, ClassifiedRdg>,
) -> Result<Schedule, ScheduleError> {
    let mut sorted: Vec<&ScheduleEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.order_key().cmp(&b.order_key()));

    struct Open {
        ttfns: NodeSet,
        new: NodeSet,
        origin: usize,
    }
    let mut open: Vec<Open> = Vec::new();
    let mut developed = NodeSet::new();
    let mut dropped = Vec::new();
    for entry in sorted {
        let new: NodeSet = entry.coverage.difference(&developed).cloned().collect();
        if !new.is_empty() {
            developed.extend(new.iter().cloned());
            open.push(Open {
                ttfns: entry.ttfns.clone(),
                new,
                origin: entry.coverage.len(),
            });
        } else if let Some(last) = open.last_mut() {
            last.ttfns.extend(entry.ttfns.iter().cloned());
        } else {
            log::warn!(
                "dropping tests {:?}: no new functions and no earlier step to join",
                entry.ttfns.iter().map(|t| t.to_string()).collect::<Vec<_>>()
            );
            dropped.push(entry.clone());
        }
    }

    let mut steps = Vec::with_capacity(open.len());
    for (i, step) in open.into_iter().enumerate() {
        let mut direct = NodeSet::new();
        let mut seen = NodeSet::new();
        for ttfn in &step.ttfns {
            let rdg = rdgs.get(ttfn).ok_or_else(|| ScheduleError::MissingRdg(ttfn.clone()))?;
            direct.extend(rdg.direct_from_entry().into_iter().cloned());
            seen.extend(rdg.classes.keys().cloned());
        }
        let mut new_tcfns = NodeSet::new();
        let mut new_dcfns = NodeSet::new();
        for f in step.new {
            if direct.contains(&f) {
                new_tcfns.insert(f);
            } else if seen.contains(&f) {
                new_dcfns.insert(f);
            } else {
                return Err(ScheduleError::Unresolved {
                    step: i + 1,
                    function: f,
                });
            }
        }
        steps.push(ScheduleStep {
            step_index: i + 1,
            ttfns: step.ttfns,
            new_tcfns,
            new_dcfns,
            origin_coverage: step.origin,
        });
    }
    Ok(Schedule { steps, dropped })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDocument {
    schema_version: u32,
    steps: Vec<ScheduleStep>,
}

impl Schedule {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Functions developed once each step is complete (prefix unions).
    pub fn developed_by_step(&self) -> Vec<NodeSet> {
        let mut acc = NodeSet::new();
        self.steps
            .iter()
            .map(|s| {
                acc.extend(s.new_functions());
                acc.clone()
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = ScheduleDocument {
            schema_version: SCHEDULE_SCHEMA_VERSION,
            steps: self.steps.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("schedule serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleError> {
        let doc: ScheduleDocument = serde_json::from_str(text).map_err(|e| ScheduleError::Malformed(e.to_string()))?;
        if doc.schema_version != SCHEDULE_SCHEMA_VERSION {
            return Err(ScheduleError::Malformed(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        for (i, s) in doc.steps.iter().enumerate() {
            if s.step_index != i + 1 {
                return Err(ScheduleError::Malformed(format!(
                    "step {} has step_index {}",
                    i + 1,
                    s.step_index
                )));
            }
            if s.ttfns.is_empty() || s.new_functions().is_empty() {
                return Err(ScheduleError::Malformed(format!("step {} is empty", i + 1)));
            }
            if s.new_tcfns.intersection(&s.new_dcfns).next().is_some() {
                return Err(ScheduleError::Malformed(format!(
                    "step {} lists a function as both target and dependent",
                    i + 1
                )));
            }
        }
        Ok(Schedule {
            steps: doc.steps,
            dropped: Vec::new(),
        })
    }
}
