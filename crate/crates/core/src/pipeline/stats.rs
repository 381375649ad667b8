//! Dataset statistics, difficulty tiers and the Lite split.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::TaskInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Tier from the average number of new functions per step: below 2 is
/// Easy, below 3 Medium, 3 and above Hard.
pub fn tier_for(avg_functions: f64) -> Tier {
    if avg_functions < 2.0 {
        Tier::Easy
    } else if avg_functions < 3.0 {
        Tier::Medium
    } else {
        Tier::Hard
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectStats {
    pub steps: usize,
    pub avg_files: f64,
    pub avg_functions: f64,
    pub avg_context_tokens: f64,
    pub avg_patch_tokens: f64,
    pub avg_dep_depth: f64,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetStats {
    /// Tokenizer behind the token averages.
    pub tokenizer: String,
    pub projects: BTreeMap<String, ProjectStats>,
}

impl DatasetStats {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }
}

/// Per-project averages over steps. Token counts were fixed at synthesis
/// time by `tokenizer`.
pub fn compute_stats(instances: &[TaskInstance], tokenizer: &str) -> DatasetStats {
    let mut groups: BTreeMap<&str, Vec<&TaskInstance>> = BTreeMap::new();
    for i in instances {
        groups.entry(&i.project).or_default().push(i);
    }
    let projects = groups
        .into_iter()
        .map(|(p, items)| {
            let n = items.len() as f64;
            let avg = |f: fn(&TaskInstance) -> usize| items.iter().map(|i| f(i)).sum::<usize>() as f64 / n;
            let avg_functions = avg(|i| i.stats.num_functions);
            let s = ProjectStats {
                steps: items.len(),
                avg_files: avg(|i| i.stats.num_files),
                avg_functions,
                avg_context_tokens: avg(|i| i.stats.context_tokens),
                avg_patch_tokens: avg(|i| i.stats.patch_tokens),
                avg_dep_depth: avg(|i| i.stats.dep_depth),
                tier: tier_for(avg_functions),
            };
            (p.to_string(), s)
        })
        .collect();
    DatasetStats {
        tokenizer: tokenizer.to_string(),
        projects,
    }
}

/// The first `n` steps of every project, in step order.
pub fn make_lite_split(instances: &[TaskInstance], n: usize) -> Vec<TaskInstance> {
    let mut groups: BTreeMap<&str, Vec<&TaskInstance>> = BTreeMap::new();
    for i in instances {
        groups.entry(&i.project).or_default().push(i);
    }
    groups
        .into_values()
        .flat_map(|mut items| {
            items.sort_by_key(|i| i.step_index);
            items.into_iter().take(n).cloned()
        })
        .collect()
}
