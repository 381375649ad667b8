//! Straight-line reference for scheduling, written from the algorithm
//! description over plain vectors. Shares no code with the library beyond
//! the trace type it reads.

use tddsynth_core::{FunctionNode, Schedule, TestTrace};

pub type Key = (String, u32, String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleStep {
    pub tests: Vec<Key>,
    pub tcfns: Vec<Key>,
    pub dcfns: Vec<Key>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSchedule {
    pub steps: Vec<OracleStep>,
    pub dropped: Vec<Vec<Key>>,
}

pub fn key(n: &FunctionNode) -> Key {
    (n.filepath.clone(), n.lineno, n.name.clone())
}

fn is_test_side(n: &FunctionNode) -> bool {
    n.filepath.starts_with("tests/")
}

fn sorted(mut v: Vec<Key>) -> Vec<Key> {
    v.sort();
    v.dedup();
    v
}

struct Raw {
    test: Key,
    coverage: Vec<Key>,
    direct: Vec<Key>,
}

fn raw(trace: &TestTrace) -> Raw {
    let coverage = trace.nodes[1..].iter().filter(|n| !is_test_side(n)).map(key).collect();
    let direct = trace
        .edges
        .iter()
        .filter(|(u, v)| *u == 0 && !is_test_side(&trace.nodes[*v]))
        .map(|&(_, v)| key(&trace.nodes[v]))
        .collect();
    Raw {
        test: key(&trace.nodes[0]),
        coverage: sorted(coverage),
        direct: sorted(direct),
    }
}

pub fn schedule(traces: &[TestTrace]) -> OracleSchedule {
    let raws: Vec<Raw> = traces.iter().map(raw).collect();

    // Group tests by identical coverage.
    let mut groups: Vec<(Vec<Key>, Vec<Key>)> = Vec::new();
    for r in &raws {
        match groups.iter_mut().find(|(cov, _)| *cov == r.coverage) {
            Some((_, tests)) => tests.push(r.test.clone()),
            None => groups.push((r.coverage.clone(), vec![r.test.clone()])),
        }
    }
    for g in &mut groups {
        g.1.sort();
    }
    groups.sort_by(|a, b| (a.0.len(), &a.0, &a.1).cmp(&(b.0.len(), &b.0, &b.1)));

    let mut developed: Vec<Key> = Vec::new();
    let mut open: Vec<(Vec<Key>, Vec<Key>)> = Vec::new();
    let mut dropped = Vec::new();
    for (coverage, tests) in groups {
        let fresh: Vec<Key> = coverage.iter().filter(|f| !developed.contains(f)).cloned().collect();
        if !fresh.is_empty() {
            developed.extend(fresh.iter().cloned());
            open.push((tests, fresh));
        } else if let Some(last) = open.last_mut() {
            last.0.extend(tests);
        } else {
            dropped.push(tests);
        }
    }

    let steps = open
        .into_iter()
        .map(|(tests, fresh)| {
            let tests = sorted(tests);
            let mut direct = Vec::new();
            for r in &raws {
                if tests.contains(&r.test) {
                    direct.extend(r.direct.iter().cloned());
                }
            }
            let (tcfns, dcfns): (Vec<Key>, Vec<Key>) = fresh.into_iter().partition(|f| direct.contains(f));
            OracleStep {
                tests,
                tcfns: sorted(tcfns),
                dcfns: sorted(dcfns),
            }
        })
        .collect();
    OracleSchedule { steps, dropped }
}

/// The library schedule in the reference's shape.
pub fn project(s: &Schedule) -> OracleSchedule {
    let keys = |set: &std::collections::BTreeSet<FunctionNode>| sorted(set.iter().map(key).collect());
    OracleSchedule {
        steps: s
            .steps
            .iter()
            .map(|st| OracleStep {
                tests: keys(&st.ttfns),
                tcfns: keys(&st.new_tcfns),
                dcfns: keys(&st.new_dcfns),
            })
            .collect(),
        dropped: s.dropped.iter().map(|e| keys(&e.ttfns)).collect(),
    }
}

/// Structural properties every schedule must satisfy, checked against the
/// raw `(entry, coverage)` pairs.
pub fn check_invariants(
    s: &Schedule,
    entries: &[(FunctionNode, std::collections::BTreeSet<FunctionNode>)],
) -> Result<(), String> {
    use std::collections::BTreeSet;
    let coverage_of = |t: &FunctionNode| entries.iter().find(|(e, _)| e == t).map(|(_, c)| c.clone());

    let mut developed: BTreeSet<FunctionNode> = BTreeSet::new();
    let mut placed: Vec<FunctionNode> = Vec::new();
    let mut last_origin = 0;
    for step in &s.steps {
        let fresh = step.new_functions();
        if fresh.is_empty() {
            return Err(format!("step {} introduces nothing", step.step_index));
        }
        if let Some(dup) = fresh.iter().find(|f| developed.contains(*f)) {
            return Err(format!("{dup} developed twice"));
        }
        developed.extend(fresh);
        for t in &step.ttfns {
            let cov = coverage_of(t).ok_or_else(|| format!("unknown test {t}"))?;
            if !cov.is_subset(&developed) {
                return Err(format!(
                    "step {} runs {t} before its dependencies exist",
                    step.step_index
                ));
            }
            placed.push(t.clone());
        }
        if step.origin_coverage < last_origin {
            return Err(format!(
                "step {} opened by a smaller entry than its predecessor",
                step.step_index
            ));
        }
        last_origin = step.origin_coverage;
    }
    for d in &s.dropped {
        placed.extend(d.ttfns.iter().cloned());
    }
    let mut all: Vec<FunctionNode> = entries.iter().map(|(e, _)| e.clone()).collect();
    all.sort();
    all.dedup();
    placed.sort();
    if placed != all {
        return Err("tests are not partitioned across steps".into());
    }
    let covered: BTreeSet<FunctionNode> = entries
        .iter()
        .filter(|(e, _)| !s.dropped.iter().any(|d| d.ttfns.contains(e)))
        .flat_map(|(_, c)| c.iter().cloned())
        .collect();
    if covered != developed {
        return Err("developed functions differ from covered functions".into());
    }
    Ok(())
}
