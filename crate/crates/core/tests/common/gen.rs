//! Random inputs shared by the property and acceptance suites.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use tddsynth_core::docgen::Provenance;
use tddsynth_core::pipeline::{InstanceStats, TaskInstance};
use tddsynth_core::{
    classify, core_coverage, ClassifiedRdg, FileTree, FilterRules, FunctionNode, ProjectFilter, TestTrace, TraceStatus,
};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn filter() -> ProjectFilter {
    ProjectFilter::new("/repo", FilterRules::default()).unwrap()
}

/// Core function number `i` of a synthetic project.
pub fn func(i: usize) -> FunctionNode {
    FunctionNode::new(format!("pkg/mod_{}.py", i % 3), 10 + 7 * i as u32, format!("f{i}"))
}

pub fn test_node(k: usize) -> FunctionNode {
    FunctionNode::new("tests/test_gen.py", 1 + 20 * k as u32, format!("test_{k}"))
}

fn helper_node(k: usize) -> FunctionNode {
    FunctionNode::new("tests/test_gen.py", 15 + 20 * k as u32, format!("helper_{k}"))
}

/// A trace for test `k` covering a random non-empty subset of `universe`
/// core functions. Some traces route calls through a test-side helper.
pub fn random_trace(rng: &mut StdRng, k: usize, universe: usize) -> TestTrace {
    let mut pool: Vec<usize> = (0..universe).collect();
    pool.shuffle(rng);
    let size = rng.gen_range(1..=universe.min(6));
    let cover = &pool[..size];

    let with_helper = rng.gen_bool(0.25);
    let mut nodes = vec![test_node(k)];
    if with_helper {
        nodes.push(helper_node(k));
    }
    let first_core = nodes.len();
    nodes.extend(cover.iter().map(|&i| func(i)));

    let mut edges = Vec::new();
    if with_helper {
        edges.push((0, 1));
    }
    let mut reached: Vec<usize> = if with_helper { vec![1] } else { Vec::new() };
    for idx in first_core..nodes.len() {
        let direct = reached.is_empty() || rng.gen_bool(0.4);
        if direct {
            edges.push((0, idx));
        } else {
            let from = *reached.choose(rng).unwrap();
            edges.push((from, idx));
        }
        reached.push(idx);
    }
    let extra = rng.gen_range(0..=size);
    for _ in 0..extra {
        let u = rng.gen_range(first_core..nodes.len());
        let v = rng.gen_range(first_core..nodes.len());
        edges.push((u, v));
    }
    TestTrace::new(
        format!("tests/test_gen.py::test_{k}"),
        TraceStatus::Passed,
        nodes,
        edges,
    )
    .unwrap()
}

/// Between one and `max_tests` random traces over a shared universe.
/// Equal coverage sets are likely, so merging is exercised.
pub fn random_traces(rng: &mut StdRng, max_tests: usize) -> Vec<TestTrace> {
    let universe = rng.gen_range(1..=10);
    let n = rng.gen_range(1..=max_tests);
    (0..n).map(|k| random_trace(rng, k, universe)).collect()
}

pub type Entries = Vec<(FunctionNode, std::collections::BTreeSet<FunctionNode>)>;

/// Classified graphs keyed by entry plus the `(entry, coverage)` pairs the
/// scheduler consumes.
pub fn classified(traces: &[TestTrace]) -> (BTreeMap<FunctionNode, ClassifiedRdg>, Entries) {
    let f = filter();
    let mut rdgs = BTreeMap::new();
    let mut entries = Vec::new();
    for t in traces {
        let rdg = classify(t, &f);
        entries.push((rdg.entry().clone(), core_coverage(&rdg)));
        rdgs.insert(rdg.entry().clone(), rdg);
    }
    (rdgs, entries)
}

/// Re-indexes every node except the entry by a random permutation.
pub fn reorder_nodes(rng: &mut StdRng, trace: &TestTrace) -> TestTrace {
    let n = trace.nodes.len();
    let mut perm: Vec<usize> = (1..n).collect();
    perm.shuffle(rng);
    let mut new_index = vec![0; n];
    for (pos, &old) in perm.iter().enumerate() {
        new_index[old] = pos + 1;
    }
    let mut nodes = vec![trace.nodes[0].clone(); n];
    for (old, node) in trace.nodes.iter().enumerate().skip(1) {
        nodes[new_index[old]] = node.clone();
    }
    let mut edges: Vec<(usize, usize)> = trace.edges.iter().map(|&(u, v)| (new_index[u], new_index[v])).collect();
    edges.shuffle(rng);
    TestTrace::new(trace.test_id.clone(), trace.status, nodes, edges).unwrap()
}

/// A synthetic source file whose lines are all distinct.
pub fn random_file(rng: &mut StdRng, tag: &str, lines: usize) -> String {
    (0..lines)
        .map(|i| format!("{tag}_line_{i} = {}\n", rng.gen_range(0..1000)))
        .collect()
}

/// Copies `text` with random line replacements, deletions and insertions.
/// New lines carry a unique marker so search blocks stay unambiguous.
pub fn mutate(rng: &mut StdRng, text: &str, tag: &str) -> String {
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        match rng.gen_range(0..10) {
            0 => {}
            1 => out.push_str(&format!("{tag}_changed_{i} = True\n")),
            2 => {
                out.push_str(line);
                out.push('\n');
                out.push_str(&format!("{tag}_added_{i} = None\n"));
            }
            _ => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out
}

/// An `(old, new)` pair of trees with edited, created and deleted files.
pub fn random_tree_pair(rng: &mut StdRng) -> (FileTree, FileTree) {
    let mut old = FileTree::new();
    let mut new = FileTree::new();
    let files = rng.gen_range(1..=4);
    for f in 0..files {
        let path = format!("pkg/file_{f}.py");
        let tag = format!("f{f}");
        let lines = rng.gen_range(1..=60);
        let body = random_file(rng, &tag, lines);
        match rng.gen_range(0..8) {
            0 => new.insert(path, body),
            1 => old.insert(path, body),
            _ => {
                let changed = mutate(rng, &body, &tag);
                old.insert(path.clone(), body);
                new.insert(path, changed);
            }
        }
    }
    (old, new)
}

pub fn instance(project: &str, step_index: usize, num_functions: usize) -> TaskInstance {
    TaskInstance {
        instance_id: format!("{project}__step-{step_index}"),
        project: project.to_string(),
        commit: "tree-sha256:0".into(),
        step_index,
        task_document: String::new(),
        test_ids: vec![format!("tests/test_x.py::test_{step_index}")],
        skeleton_patch: String::new(),
        gt_patch: String::new(),
        gt_replace: Default::default(),
        context_files: Vec::new(),
        stats: InstanceStats {
            num_files: 1,
            num_functions,
            ..Default::default()
        },
        provenance: Provenance {
            prompt_hash: String::new(),
            generator: "fallback".into(),
            notes: Vec::new(),
        },
    }
}
