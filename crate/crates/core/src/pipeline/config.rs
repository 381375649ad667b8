//! Project configuration (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::docgen::{DEFAULT_MAX_IN_FLIGHT, DEFAULT_MAX_LENGTH};
use crate::filter::FilterRules;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("bad override {0:?}: expected key=value")]
    BadOverride(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocgenMode {
    Fallback,
    Service,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DocgenConfig {
    pub mode: DocgenMode,
    pub max_in_flight: usize,
    pub max_length: u32,
    /// Use the template when the service fails instead of failing the step.
    pub allow_fallback: bool,
}

impl Default for DocgenConfig {
    fn default() -> Self {
        Self {
            mode: DocgenMode::Fallback,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            max_length: DEFAULT_MAX_LENGTH,
            allow_fallback: true,
        }
    }
}

fn default_collect() -> String {
    "python3 -m pytest --collect-only -q -p no:cacheprovider".into()
}
fn default_collect_ok() -> Vec<i32> {
    vec![0, 5]
}
fn default_test() -> String {
    "python3 -m pytest -q -p no:cacheprovider {test_ids}".into()
}
fn default_shim() -> String {
    "sweflow-trace".into()
}
fn default_jobs() -> usize {
    4
}
fn default_tokenizer() -> String {
    "whitespace".into()
}
fn default_timeout() -> u64 {
    300
}
fn default_lite_n() -> usize {
    50
}
fn default_max_iterations() -> u32 {
    30
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub project: String,
    /// Checkout root; relative paths resolve against the config file.
    pub repo: PathBuf,
    /// Revision id; defaults to a content digest of the checkout.
    #[serde(default)]
    pub commit: Option<String>,
    #[serde(default = "default_collect")]
    pub collect_command: String,
    /// Exit codes of the collection command that mean success.
    #[serde(default = "default_collect_ok")]
    pub collect_ok_exit_codes: Vec<i32>,
    /// Test-run template with `{repo_root}` and `{test_ids}` placeholders.
    #[serde(default = "default_test")]
    pub test_command: String,
    #[serde(default = "default_shim")]
    pub shim_command: String,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_tokenizer")]
    pub tokenizer: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_lite_n")]
    pub lite_n: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    #[serde(default)]
    pub filter: FilterRules,
    #[serde(default)]
    pub docgen: DocgenConfig,
}

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(root: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(spec.into()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::BadOverride(spec.into()));
    }
    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut table = root;
    for p in parents {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::BadOverride(spec.into()))?;
    }
    table.insert(last.to_string(), parse_override_value(raw.trim()));
    Ok(())
}

impl Config {
    /// Parses TOML text, applies `key=value` overrides (dotted keys reach
    /// into tables), and rejects unknown keys.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `repo` is taken relative to it.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text, overrides)?;
        if cfg.repo.is_relative() {
            cfg.repo = path.parent().unwrap_or(Path::new(".")).join(&cfg.repo);
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.project.is_empty() || self.project.contains(['/', '\\']) || self.project.contains("__") {
            return bad("project must be a non-empty name without slashes or `__`");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if self.docgen.max_in_flight == 0 {
            return bad("docgen.max_in_flight must be at least 1");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if crate::tokenize::tokenizer_by_name(&self.tokenizer).is_none() {
            return bad(&format!("unknown tokenizer {:?}", self.tokenizer));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = Config::parse(
            "project = \"p\"\nrepo = \"r\"\n",
            &["jobs=2".into(), "docgen.mode=service".into(), "commit=abc".into()],
        )
        .unwrap();
        assert_eq!(c.jobs, 2);
        assert_eq!(c.docgen.mode, DocgenMode::Service);
        assert_eq!(c.commit.as_deref(), Some("abc"));
        assert_eq!(c.lite_n, 50);
        assert_eq!(c.filter, FilterRules::default());
        assert_eq!(Config::parse(&c.to_toml(), &[]).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        assert!(Config::parse("project = \"p\"\nrepo = \"r\"\ncolour = 1\n", &[]).is_err());
        assert!(Config::parse("project = \"p\"\nrepo = \"r\"\n[docgen]\nmood = 1\n", &[]).is_err());
        assert!(Config::parse("project = \"p\"\nrepo = \"r\"\n", &["jobs=0".into()]).is_err());
        assert!(Config::parse("project = \"p\"\nrepo = \"r\"\n", &["tokenizer=bpe".into()]).is_err());
        assert!(matches!(
            Config::parse("project = \"p\"\nrepo = \"r\"\n", &["nokey".into()]),
            Err(ConfigError::BadOverride(_))
        ));
    }
}
