//! Runtime dependency graphs: trace-file parsing, project restriction, node
//! classification, coverage and dependency depth.
//!
//! A trace is the call graph recorded while a single unit test ran. Node 0 is
//! always the test entry. Edges are caller → callee pairs, deduplicated, in
//! the order they were first observed.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::filter::ProjectFilter;
use crate::node::FunctionNode;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceStatus {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestTrace {
    pub test_id: String,
    pub status: TraceStatus,
    pub nodes: Vec<FunctionNode>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("edge {edge} references node {index} but the trace has {len} nodes")]
    IndexOutOfRange { edge: usize, index: usize, len: usize },
    #[error("node {0} is not reachable from the test entry")]
    UnreachableNode(FunctionNode),
}

/// How unknown top-level or node fields are treated while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDocument {
    schema_version: u32,
    test_id: String,
    status: TraceStatus,
    nodes: Vec<FunctionNode>,
    edges: Vec<[usize; 2]>,
}

const TRACE_FIELDS: &[&str] = &["schema_version", "test_id", "status", "nodes", "edges"];
const NODE_FIELDS: &[&str] = &["filepath", "lineno", "name"];

/// Parses one trace document in strict mode.
pub fn parse_trace_file(bytes: &[u8]) -> Result<TestTrace, TraceError> {
    parse_trace_file_with(bytes, Strictness::Strict)
}

pub fn parse_trace_file_with(bytes: &[u8], mode: Strictness) -> Result<TestTrace, TraceError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TraceError::MalformedTrace(format!("not UTF-8: {e}")))?;
    let doc: TraceDocument = match mode {
        Strictness::Strict => serde_json::from_str(text).map_err(|e| TraceError::MalformedTrace(e.to_string()))?,
        Strictness::Lenient => {
            let mut value: serde_json::Value =
                serde_json::from_str(text).map_err(|e| TraceError::MalformedTrace(e.to_string()))?;
            strip_unknown(&mut value);
            serde_json::from_value(value).map_err(|e| TraceError::MalformedTrace(e.to_string()))?
        }
    };
    if doc.schema_version != TRACE_SCHEMA_VERSION {
        return Err(TraceError::MalformedTrace(format!(
            "unsupported schema_version {}",
            doc.schema_version
        )));
    }
    TestTrace::new(
        doc.test_id,
        doc.status,
        doc.nodes,
        doc.edges.into_iter().map(|[a, b]| (a, b)).collect(),
    )
}

fn strip_unknown(value: &mut serde_json::Value) {
    let Some(obj) = value.as_object_mut() else {
        return;
    };
    obj.retain(|k, _| {
        let keep = TRACE_FIELDS.contains(&k.as_str());
        if !keep {
            log::warn!("ignoring unknown trace field `{k}`");
        }
        keep
    });
    if let Some(nodes) = obj.get_mut("nodes").and_then(|n| n.as_array_mut()) {
        for node in nodes.iter_mut().filter_map(|n| n.as_object_mut()) {
            node.retain(|k, _| {
                let keep = NODE_FIELDS.contains(&k.as_str());
                if !keep {
                    log::warn!("ignoring unknown node field `{k}`");
                }
                keep
            });
        }
    }
}

impl TestTrace {
    /// Builds a trace and enforces its invariants. Duplicate edges and
    /// self-loops (direct recursion) are dropped, keeping first-occurrence
    /// order.
    pub fn new(
        test_id: String,
        status: TraceStatus,
        nodes: Vec<FunctionNode>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self, TraceError> {
        if test_id.is_empty() {
            return Err(TraceError::MalformedTrace("empty test_id".into()));
        }
        if nodes.is_empty() {
            return Err(TraceError::MalformedTrace("trace has no nodes".into()));
        }
        let mut seen_nodes = HashSet::with_capacity(nodes.len());
        for node in &nodes {
            node.validate()
                .map_err(|e| TraceError::MalformedTrace(format!("node {node}: {e}")))?;
            if !seen_nodes.insert(node) {
                return Err(TraceError::MalformedTrace(format!("duplicate node {node}")));
            }
        }
        let mut kept = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for (i, &(u, v)) in edges.iter().enumerate() {
            for idx in [u, v] {
                if idx >= nodes.len() {
                    return Err(TraceError::IndexOutOfRange {
                        edge: i,
                        index: idx,
                        len: nodes.len(),
                    });
                }
            }
            if u == v || !seen.insert((u, v)) {
                continue;
            }
            kept.push((u, v));
        }
        let trace = Self {
            test_id,
            status,
            nodes,
            edges: kept,
        };
        let reach = trace.reachable_from_entry();
        if let Some(i) = reach.iter().position(|r| !r) {
            return Err(TraceError::UnreachableNode(trace.nodes[i].clone()));
        }
        Ok(trace)
    }

    pub fn entry(&self) -> &FunctionNode {
        &self.nodes[0]
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(u, v) in &self.edges {
            adj[u].push(v);
        }
        adj
    }

    fn reachable_from_entry(&self) -> Vec<bool> {
        let adj = self.successors();
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Serializes to the trace-file format: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let doc = TraceDocument {
            schema_version: TRACE_SCHEMA_VERSION,
            test_id: self.test_id.clone(),
            status: self.status,
            nodes: self.nodes.clone(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("trace serializes");
        s.push('\n');
        s
    }
}

/// Removes nodes outside the project, reconnecting each retained caller to
/// the retained functions it reached through removed ones. The entry node is
/// always kept.
pub fn restrict_to_project(trace: &TestTrace, filter: &ProjectFilter) -> TestTrace {
    let keep: Vec<bool> = trace
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| i == 0 || filter.is_project(n))
        .collect();
    if keep.iter().all(|k| *k) {
        return trace.clone();
    }
    let adj = trace.successors();
    let mut bridged: Vec<(usize, usize)> = Vec::new();
    for &(u, v) in &trace.edges {
        if !keep[u] {
            continue;
        }
        if keep[v] {
            bridged.push((u, v));
            continue;
        }
        // walk through removed nodes in edge order
        let mut seen = HashSet::new();
        let mut stack = vec![v];
        let mut found = Vec::new();
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            if keep[x] {
                found.push(x);
                continue;
            }
            for &y in adj[x].iter().rev() {
                stack.push(y);
            }
        }
        bridged.extend(found.into_iter().map(|w| (u, w)));
    }
    let mut remap = vec![usize::MAX; trace.nodes.len()];
    let mut nodes = Vec::new();
    for (i, n) in trace.nodes.iter().enumerate() {
        if keep[i] {
            remap[i] = nodes.len();
            nodes.push(n.clone());
        }
    }
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (u, v) in bridged {
        let e = (remap[u], remap[v]);
        if e.0 != e.1 && seen.insert(e) {
            edges.push(e);
        }
    }
    prune_unreachable(TestTrace {
        test_id: trace.test_id.clone(),
        status: trace.status,
        nodes,
        edges,
    })
}

fn prune_unreachable(trace: TestTrace) -> TestTrace {
    let reach = trace.reachable_from_entry();
    if reach.iter().all(|r| *r) {
        return trace;
    }
    let mut remap = vec![usize::MAX; trace.nodes.len()];
    let mut nodes = Vec::new();
    for (i, n) in trace.nodes.into_iter().enumerate() {
        if reach[i] {
            remap[i] = nodes.len();
            nodes.push(n);
        }
    }
    let edges = trace
        .edges
        .into_iter()
        .filter(|&(u, v)| reach[u] && reach[v])
        .map(|(u, v)| (remap[u], remap[v]))
        .collect();
    TestTrace { nodes, edges, ..trace }
}

/// Unions several traces recorded for the same test entry (for example the
/// cases of a parametrized test). Nodes and edges keep first-occurrence
/// order across the inputs; the status is `passed` only if every input passed.
pub fn merge_same_entry(traces: &[TestTrace]) -> Option<TestTrace> {
    let first = traces.first()?;
    let mut index: HashMap<FunctionNode, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut status = TraceStatus::Passed;
    for t in traces {
        if t.entry() != first.entry() {
            return None;
        }
        status = status.max(t.status);
        let local: Vec<usize> = t
            .nodes
            .iter()
            .map(|n| {
                *index.entry(n.clone()).or_insert_with(|| {
                    nodes.push(n.clone());
                    nodes.len() - 1
                })
            })
            .collect();
        for &(u, v) in &t.edges {
            let e = (local[u], local[v]);
            if seen.insert(e) {
                edges.push(e);
            }
        }
    }
    Some(TestTrace {
        test_id: first.test_id.clone(),
        status,
        nodes,
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeClass {
    /// Test entry point.
    #[serde(rename = "TTFN")]
    Ttfn,
    /// Test-side helper.
    #[serde(rename = "DTFN")]
    Dtfn,
    /// Core function called directly by a test entry.
    #[serde(rename = "TCFN")]
    Tcfn,
    /// Core function reached only transitively.
    #[serde(rename = "DCFN")]
    Dcfn,
}

impl NodeClass {
    pub fn is_core(self) -> bool {
        matches!(self, NodeClass::Tcfn | NodeClass::Dcfn)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedRdg {
    pub trace: TestTrace,
    pub classes: BTreeMap<FunctionNode, NodeClass>,
}

impl ClassifiedRdg {
    pub fn class_of(&self, node: &FunctionNode) -> Option<NodeClass> {
        self.classes.get(node).copied()
    }

    pub fn entry(&self) -> &FunctionNode {
        self.trace.entry()
    }

    /// Nodes with a direct edge from any TTFN of this graph.
    pub fn direct_from_entry(&self) -> BTreeSet<&FunctionNode> {
        self.trace
            .edges
            .iter()
            .filter(|(u, _)| self.classes[&self.trace.nodes[*u]] == NodeClass::Ttfn)
            .map(|&(_, v)| &self.trace.nodes[v])
            .collect()
    }
}

/// Tags every node of the project-restricted trace with its class: the entry
/// is TTFN, test-file nodes are DTFN, core nodes called directly by the entry
/// are TCFN and all other core nodes are DCFN.
pub fn classify(trace: &TestTrace, filter: &ProjectFilter) -> ClassifiedRdg {
    let trace = restrict_to_project(trace, filter);
    let direct: HashSet<usize> = trace.edges.iter().filter(|(u, _)| *u == 0).map(|&(_, v)| v).collect();
    let classes = trace
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let class = if i == 0 {
                NodeClass::Ttfn
            } else if filter.is_test_node(n) {
                NodeClass::Dtfn
            } else if direct.contains(&i) {
                NodeClass::Tcfn
            } else {
                NodeClass::Dcfn
            };
            (n.clone(), class)
        })
        .collect();
    ClassifiedRdg { trace, classes }
}

/// The TCFN ∪ DCFN nodes of a graph in canonical order.
pub fn core_coverage(rdg: &ClassifiedRdg) -> BTreeSet<FunctionNode> {
    rdg.classes
        .iter()
        .filter(|(_, c)| c.is_core())
        .map(|(n, _)| n.clone())
        .collect()
}

/// Upper limit on simple-path expansions before depth falls back to the
/// strongly-connected-component bound.
const DEPTH_SEARCH_BUDGET: usize = 200_000;

/// Longest simple path, in core-node hops, that starts with an edge from a
/// test-side node into core code.
///
/// Acyclic core graphs are solved exactly by dynamic programming. Cyclic ones
/// are searched exhaustively up to a fixed budget; past it the result is the
/// longest path through the condensation with each component weighted by its
/// size, which never exceeds the coverage size.
pub fn dependency_depth(rdg: &ClassifiedRdg) -> usize {
    let t = &rdg.trace;
    let is_core: Vec<bool> = t.nodes.iter().map(|n| rdg.classes[n].is_core()).collect();
    let mut adj = vec![Vec::new(); t.nodes.len()];
    let mut starts = BTreeSet::new();
    for &(u, v) in &t.edges {
        if !is_core[v] {
            continue;
        }
        if is_core[u] {
            adj[u].push(v);
        } else {
            starts.insert(v);
        }
    }
    if starts.is_empty() {
        return 0;
    }
    let comp = scc(&adj);
    let cyclic = {
        let mut sizes = HashMap::new();
        for &c in &comp {
            *sizes.entry(c).or_insert(0usize) += 1;
        }
        sizes.values().any(|&s| s > 1)
    };
    if !cyclic {
        let mut memo = vec![None; adj.len()];
        return starts
            .iter()
            .map(|&s| dag_longest(s, &adj, &mut memo))
            .max()
            .unwrap_or(0);
    }
    let mut budget = DEPTH_SEARCH_BUDGET;
    let mut on_path = vec![false; adj.len()];
    let mut best = 0;
    for &s in &starts {
        match simple_longest(s, &adj, &mut on_path, &mut budget) {
            Some(d) => best = best.max(d),
            None => {
                log::warn!(
                    "dependency depth search for {} exceeded its budget; using component bound",
                    t.test_id
                );
                return condensation_bound(&starts, &adj, &comp);
            }
        }
    }
    best
}

fn dag_longest(u: usize, adj: &[Vec<usize>], memo: &mut Vec<Option<usize>>) -> usize {
    if let Some(d) = memo[u] {
        return d;
    }
    let mut best = 0;
    for &v in &adj[u] {
        best = best.max(dag_longest(v, adj, memo));
    }
    memo[u] = Some(best + 1);
    best + 1
}

fn simple_longest(u: usize, adj: &[Vec<usize>], on_path: &mut [bool], budget: &mut usize) -> Option<usize> {
    if *budget == 0 {
        return None;
    }
    *budget -= 1;
    on_path[u] = true;
    let mut best = 0;
    for &v in &adj[u] {
        if !on_path[v] {
            best = best.max(simple_longest(v, adj, on_path, budget)?);
        }
    }
    on_path[u] = false;
    Some(best + 1)
}

/// Component id per node (Kosaraju, iterative).
fn scc(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for s in 0..n {
        if visited[s] {
            continue;
        }
        visited[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((u, i)) = stack.pop() {
            if i < adj[u].len() {
                stack.push((u, i + 1));
                let v = adj[u][i];
                if !visited[v] {
                    visited[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
            }
        }
    }
    let mut radj = vec![Vec::new(); n];
    for (u, vs) in adj.iter().enumerate() {
        for &v in vs {
            radj[v].push(u);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = next;
        while let Some(u) = stack.pop() {
            for &v in &radj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

fn condensation_bound(starts: &BTreeSet<usize>, adj: &[Vec<usize>], comp: &[usize]) -> usize {
    let ncomp = comp.iter().max().map_or(0, |m| m + 1);
    let mut weight = vec![0usize; ncomp];
    let mut cadj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncomp];
    for (u, vs) in adj.iter().enumerate() {
        weight[comp[u]] += 1;
        for &v in vs {
            if comp[u] != comp[v] {
                cadj[comp[u]].insert(comp[v]);
            }
        }
    }
    fn go(c: usize, cadj: &[BTreeSet<usize>], w: &[usize], memo: &mut [Option<usize>]) -> usize {
        if let Some(d) = memo[c] {
            return d;
        }
        let best = cadj[c].iter().map(|&d| go(d, cadj, w, memo)).max().unwrap_or(0);
        memo[c] = Some(best + w[c]);
        best + w[c]
    }
    let mut memo = vec![None; ncomp];
    starts
        .iter()
        .map(|&s| go(comp[s], &cadj, &weight, &mut memo))
        .max()
        .unwrap_or(0)
}
