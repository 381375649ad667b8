//! Test discovery through the configured collection command.

use std::path::Path;
use std::time::Duration;

use super::{Config, PipelineError};
use crate::proc::{expand_template, run_command};

/// Test ids printed one per line as `path::name[...]`; everything else in the
/// collector's output is ignored.
pub fn parse_collected(output: &str) -> Vec<String> {
    let mut ids: Vec<String> = output
        .lines()
        .map(|l| l.trim_end())
        .filter(|l| l.contains("::") && !l.starts_with(char::is_whitespace) && !l.starts_with('<'))
        .map(str::to_string)
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

/// Sorted test ids of the checkout at `repo`.
pub fn collect_tests(repo: &Path, config: &Config) -> Result<Vec<String>, PipelineError> {
    let fail = |code: Option<i32>, output: String| PipelineError::CollectionFailed {
        command: config.collect_command.clone(),
        code,
        output,
    };
    let argv = expand_template(&config.collect_command, repo, &[]).map_err(|e| fail(None, e))?;
    let out = run_command(
        &argv,
        repo,
        &[("PYTHONDONTWRITEBYTECODE", "1")],
        Duration::from_secs(config.timeout_secs),
    )
    .map_err(|e| fail(None, e.to_string()))?;
    match out.code {
        Some(c) if !out.timed_out && config.collect_ok_exit_codes.contains(&c) => Ok(parse_collected(&out.stdout)),
        code => Err(fail(code, out.combined())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_quiet_collector_output() {
        let out = "tests/test_b.py::test_x\ntests/test_a.py::test_y[1-2]\n\n  <Function test_z>\n12 tests collected in 0.01s\n";
        assert_eq!(
            parse_collected(out),
            ["tests/test_a.py::test_y[1-2]", "tests/test_b.py::test_x"]
        );
        assert!(parse_collected("no tests ran\n").is_empty());
    }
}
