//! Path rules deciding which traced functions belong to the project and
//! which of those are test-side code.

use std::path::PathBuf;

use globset::{GlobBuilder, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};

use crate::node::FunctionNode;

pub const DEFAULT_INCLUDE: &[&str] = &["**/*.py"];
pub const DEFAULT_EXCLUDE: &[&str] = &[
    "**/site-packages/**",
    "**/dist-packages/**",
    ".venv/**",
    "venv/**",
    "**/.tox/**",
    "**/node_modules/**",
    "vendor/**",
    "**/_vendor/**",
    "build/**",
];
pub const DEFAULT_TEST_GLOBS: &[&str] = &[
    "**/test_*.py",
    "**/*_test.py",
    "tests/**",
    "**/tests/**",
    "test/**",
    "**/test/**",
    "**/conftest.py",
];
pub const DEFAULT_TEST_PREFIXES: &[&str] = &["test"];

#[derive(Debug, thiserror::Error)]
#[error("invalid glob `{pattern}`: {source}")]
pub struct FilterError {
    pattern: String,
    #[source]
    source: globset::Error,
}

/// Serializable form of [`ProjectFilter`] as it appears in config files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterRules {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub test_globs: Vec<String>,
    pub test_name_prefixes: Vec<String>,
}

impl Default for FilterRules {
    fn default() -> Self {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            include: own(DEFAULT_INCLUDE),
            exclude: own(DEFAULT_EXCLUDE),
            test_globs: own(DEFAULT_TEST_GLOBS),
            test_name_prefixes: own(DEFAULT_TEST_PREFIXES),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectFilter {
    pub repo_root: PathBuf,
    rules: FilterRules,
    include: GlobSet,
    exclude: GlobSet,
    tests: GlobSet,
}

fn build(patterns: &[String]) -> Result<GlobSet, FilterError> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        let glob = GlobBuilder::new(p)
            .literal_separator(true)
            .build()
            .map_err(|source| FilterError {
                pattern: p.clone(),
                source,
            })?;
        b.add(glob);
    }
    b.build().map_err(|source| FilterError {
        pattern: patterns.join(","),
        source,
    })
}

impl ProjectFilter {
    pub fn new(repo_root: impl Into<PathBuf>, rules: FilterRules) -> Result<Self, FilterError> {
        Ok(Self {
            repo_root: repo_root.into(),
            include: build(&rules.include)?,
            exclude: build(&rules.exclude)?,
            tests: build(&rules.test_globs)?,
            rules,
        })
    }

    pub fn rules(&self) -> &FilterRules {
        &self.rules
    }

    /// True when the node's file is project code under the include/exclude rules.
    pub fn is_project(&self, node: &FunctionNode) -> bool {
        self.include.is_match(&node.filepath) && !self.exclude.is_match(&node.filepath)
    }

    pub fn is_test_file(&self, path: &str) -> bool {
        self.tests.is_match(path)
    }

    pub fn is_test_node(&self, node: &FunctionNode) -> bool {
        self.is_test_file(&node.filepath)
    }

    /// Whether a function name looks like a test entry point.
    pub fn is_test_entry_name(&self, name: &str) -> bool {
        self.rules
            .test_name_prefixes
            .iter()
            .any(|p| name.starts_with(p.as_str()))
    }
}

impl Default for ProjectFilter {
    fn default() -> Self {
        Self::new(".", FilterRules::default()).expect("default globs are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rules_split_tests_from_core() {
        let f = ProjectFilter::default();
        assert!(f.is_test_file("tests/helpers.py"));
        assert!(f.is_test_file("pkg/tests/unit/helpers.py"));
        assert!(f.is_test_file("pkg/test_io.py"));
        assert!(f.is_test_file("pkg/io_test.py"));
        assert!(!f.is_test_file("pkg/io.py"));
        assert!(!f.is_test_file("pkg/testing_utils.py"));
    }

    #[test]
    fn default_rules_exclude_dependencies() {
        let f = ProjectFilter::default();
        assert!(f.is_project(&FunctionNode::new("pkg/io.py", 1, "f")));
        assert!(!f.is_project(&FunctionNode::new(".venv/lib/python3.11/site-packages/x.py", 1, "f")));
        assert!(!f.is_project(&FunctionNode::new("vendor/six.py", 1, "f")));
        assert!(!f.is_project(&FunctionNode::new("pkg/data.json", 1, "f")));
    }

    #[test]
    fn bad_glob_is_reported() {
        let rules = FilterRules {
            include: vec!["a/[".into()],
            ..FilterRules::default()
        };
        let err = ProjectFilter::new(".", rules).unwrap_err();
        assert!(err.to_string().contains("a/["));
    }
}
