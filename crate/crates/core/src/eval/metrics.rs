//! Pass rate, efficiency value and the aggregate report.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalResult;
use crate::pipeline::{project_of, Tier};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("no results")]
    EmptyResults,
    #[error("invalid iterations: {0}")]
    InvalidIterations(String),
}

/// Exact fraction of passing results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRate {
    pub passed: usize,
    pub total: usize,
}

impl PassRate {
    pub fn value(&self) -> f64 {
        self.passed as f64 / self.total as f64
    }
}

impl fmt::Display for PassRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ({}/{})", self.value(), self.passed, self.total)
    }
}

pub fn pass_rate(results: &[EvalResult]) -> Result<PassRate, MetricError> {
    if results.is_empty() {
        return Err(MetricError::EmptyResults);
    }
    Ok(PassRate {
        passed: results.iter().filter(|r| r.passed).count(),
        total: results.len(),
    })
}

/// `100 * pass_rate / ln(total iterations)`. Results without an iteration
/// count are charged `max_iterations`.
pub fn efficiency_value(results: &[EvalResult], max_iterations: u32) -> Result<f64, MetricError> {
    let rate = pass_rate(results)?;
    let mut total: u64 = 0;
    for r in results {
        let it = r.iterations.unwrap_or(max_iterations);
        if it == 0 || it > max_iterations {
            return Err(MetricError::InvalidIterations(format!(
                "{}: {it} iterations (allowed 1..={max_iterations})",
                r.instance_id
            )));
        }
        total += u64::from(it);
    }
    if total < 2 {
        return Err(MetricError::InvalidIterations(format!(
            "total {total} leaves ln(total) = 0"
        )));
    }
    if rate.passed == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * rate.value() / (total as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: String,
    pub rate: PassRate,
    pub pass_rate: f64,
    /// Present when any result in the group carries iteration data.
    pub efficiency_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub results: Vec<EvalResult>,
    pub summary: Vec<ReportRow>,
}

fn row(group: String, results: &[EvalResult], max_iterations: u32) -> Result<ReportRow, MetricError> {
    let rate = pass_rate(results)?;
    let ev = match results.iter().any(|r| r.iterations.is_some()) {
        true => Some(efficiency_value(results, max_iterations)?),
        false => None,
    };
    Ok(ReportRow {
        group,
        rate,
        pass_rate: rate.value(),
        efficiency_value: ev,
    })
}

/// Rows for all results, then per project, then per tier when known.
pub fn build_report(
    results: Vec<EvalResult>,
    tiers: &BTreeMap<String, Tier>,
    max_iterations: u32,
) -> Result<EvalReport, MetricError> {
    let mut summary = vec![row("all".into(), &results, max_iterations)?];
    let mut by_project: BTreeMap<&str, Vec<EvalResult>> = BTreeMap::new();
    let mut by_tier: BTreeMap<Tier, Vec<EvalResult>> = BTreeMap::new();
    for r in &results {
        let p = project_of(&r.instance_id);
        by_project.entry(p).or_default().push(r.clone());
        if let Some(t) = tiers.get(p) {
            by_tier.entry(*t).or_default().push(r.clone());
        }
    }
    for (p, rs) in &by_project {
        summary.push(row(format!("project:{p}"), rs, max_iterations)?);
    }
    for (t, rs) in &by_tier {
        summary.push(row(format!("tier:{t}"), rs, max_iterations)?);
    }
    Ok(EvalReport { results, summary })
}

impl EvalReport {
    /// Human-readable table.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<28} {:>9} {:>9} {:>8}\n", "group", "passed", "pass rate", "EV");
        for r in &self.summary {
            let ev = r.efficiency_value.map_or("-".to_string(), |v| format!("{v:.2}"));
            out.push_str(&format!(
                "{:<28} {:>9} {:>9.3} {:>8}\n",
                r.group,
                format!("{}/{}", r.rate.passed, r.rate.total),
                r.pass_rate,
                ev
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(id: &str, passed: bool, iterations: Option<u32>) -> EvalResult {
        EvalResult {
            instance_id: id.into(),
            applied: passed,
            apply_error: None,
            tests_run: 1,
            passed,
            iterations,
            wall_time_secs: 0.0,
            output_digest: None,
            timed_out: false,
            diagnostic: None,
        }
    }

    #[test]
    fn pass_rate_is_exact() {
        let rs: Vec<_> = (0..5).map(|i| res(&format!("p__step-{i}"), i < 3, None)).collect();
        let r = pass_rate(&rs).unwrap();
        assert_eq!((r.passed, r.total), (3, 5));
        assert_eq!(r.to_string(), "0.600 (3/5)");
        assert_eq!(pass_rate(&[]), Err(MetricError::EmptyResults));
        assert_eq!(pass_rate(&[res("a", false, None)]).unwrap().value(), 0.0);
    }

    #[test]
    fn efficiency_value_rules() {
        assert_eq!(
            efficiency_value(&[res("a", true, Some(1))], 30),
            Err(MetricError::InvalidIterations("total 1 leaves ln(total) = 0".into()))
        );
        assert!(efficiency_value(&[res("a", true, Some(0)), res("b", true, Some(3))], 30).is_err());
        assert!(efficiency_value(&[res("a", true, Some(31))], 30).is_err());
        assert_eq!(efficiency_value(&[res("a", false, Some(10))], 30), Ok(0.0));
        let ev = efficiency_value(&[res("a", true, None)], 30).unwrap();
        assert!((ev - 100.0 / 30f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn report_groups() {
        let rs = vec![
            res("a__step-1", true, None),
            res("a__step-2", false, None),
            res("b__step-1", true, None),
        ];
        let tiers = BTreeMap::from([("a".to_string(), Tier::Easy)]);
        let rep = build_report(rs, &tiers, 30).unwrap();
        let groups: Vec<_> = rep.summary.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(groups, ["all", "project:a", "project:b", "tier:Easy"]);
        assert!(rep.render_table().contains("2/3"));
        assert!(rep.summary.iter().all(|r| r.efficiency_value.is_none()));
    }
}
