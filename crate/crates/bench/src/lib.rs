//! Deterministic inputs for the benchmarks.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use tddsynth_core::{
    classify, core_coverage, ClassifiedRdg, FileTree, FilterRules, FunctionNode, ProjectFilter, ReplaceSolution,
    TestTrace, TraceStatus,
};

pub fn filter() -> ProjectFilter {
    ProjectFilter::new("/repo", FilterRules::default()).expect("default rules")
}

fn func(i: usize) -> FunctionNode {
    FunctionNode::new(format!("pkg/mod_{}.py", i % 20), 10 + 7 * i as u32, format!("f{i}"))
}

/// `tests` traces over `universe` functions, each covering up to `max_cover`.
pub fn traces(tests: usize, universe: usize, max_cover: usize, seed: u64) -> Vec<TestTrace> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..tests)
        .map(|k| {
            let mut pool: Vec<usize> = (0..universe).collect();
            pool.shuffle(&mut rng);
            let size = rng.gen_range(1..=max_cover.min(universe));
            let mut nodes = vec![FunctionNode::new(
                "tests/test_bench.py",
                1 + 10 * k as u32,
                format!("test_{k}"),
            )];
            nodes.extend(pool[..size].iter().map(|&i| func(i)));
            let mut edges = Vec::new();
            for v in 1..nodes.len() {
                let u = if v == 1 || rng.gen_bool(0.3) {
                    0
                } else {
                    rng.gen_range(1..v)
                };
                edges.push((u, v));
            }
            for _ in 0..size {
                edges.push((rng.gen_range(1..nodes.len()), rng.gen_range(1..nodes.len())));
            }
            TestTrace::new(
                format!("tests/test_bench.py::test_{k}"),
                TraceStatus::Passed,
                nodes,
                edges,
            )
            .expect("valid trace")
        })
        .collect()
}

pub type Entries = Vec<(FunctionNode, BTreeSet<FunctionNode>)>;

pub fn classified(traces: &[TestTrace]) -> (BTreeMap<FunctionNode, ClassifiedRdg>, Entries) {
    let f = filter();
    let mut rdgs = BTreeMap::new();
    let mut entries = Vec::new();
    for t in traces {
        let r = classify(t, &f);
        entries.push((r.entry().clone(), core_coverage(&r)));
        rdgs.insert(r.entry().clone(), r);
    }
    (rdgs, entries)
}

/// A tree of `files` files with `lines` distinct lines each, and a copy in
/// which every tenth line is rewritten.
pub fn tree_pair(files: usize, lines: usize) -> (FileTree, FileTree) {
    let mut old = FileTree::new();
    let mut new = FileTree::new();
    for f in 0..files {
        let path = format!("pkg/file_{f}.py");
        let body: String = (0..lines).map(|i| format!("value_{f}_{i} = {i}\n")).collect();
        let edited: String = (0..lines)
            .map(|i| match i % 10 {
                0 => format!("value_{f}_{i} = {}\n", i + 1),
                _ => format!("value_{f}_{i} = {i}\n"),
            })
            .collect();
        old.insert(path.clone(), body);
        new.insert(path, edited);
    }
    (old, new)
}

/// Replace blocks equivalent to the edits of [`tree_pair`].
pub fn replace_for(old: &FileTree, new: &FileTree) -> ReplaceSolution {
    let text = tddsynth_core::make_patch(old, new);
    let patch = tddsynth_core::solutions::parse_patch(&text).expect("own patch parses");
    tddsynth_core::patch_to_replace(&patch).0
}
