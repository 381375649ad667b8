//! Ground-truth solutions and candidate edits, in unified-diff (Patch) and
//! search/replace (Replace) form.

pub mod extract;
pub mod patch;
pub mod replace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use extract::{extract_solution, ExtractError};
pub use patch::{apply_patch_strict, make_patch, parse_patch, parse_patch_lenient, Patch, PatchError};
pub use replace::{apply_replace, patch_to_replace, ReplaceBlock, ReplaceError, ReplaceSolution};

use crate::tree::FileTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionFormat {
    Replace,
    Patch,
}

impl FromStr for SolutionFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replace" => Ok(Self::Replace),
            "patch" => Ok(Self::Patch),
            other => Err(format!("unknown solution format {other:?} (expected replace or patch)")),
        }
    }
}

impl fmt::Display for SolutionFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Replace => "replace",
            Self::Patch => "patch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Replace(ReplaceSolution),
    /// Unified diff text.
    Patch(String),
}

impl Solution {
    pub fn empty(format: SolutionFormat) -> Self {
        match format {
            SolutionFormat::Replace => Self::Replace(ReplaceSolution::default()),
            SolutionFormat::Patch => Self::Patch(String::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Replace(#[from] ReplaceError),
}

/// Strict mode honours hunk offsets exactly. Otherwise hunks become replace
/// blocks and only their content matters; created and deleted files are
/// still handled as whole-file operations.
pub fn apply_patch(tree: &FileTree, text: &str, strict: bool) -> Result<FileTree, ApplyError> {
    if strict {
        return Ok(apply_patch_strict(tree, &parse_patch(text)?)?);
    }
    let (parsed, mut errors) = parse_patch_lenient(text);
    if !errors.is_empty() {
        return Err(errors.remove(0).into());
    }
    let (whole, edits): (Vec<_>, Vec<_>) = parsed
        .files
        .into_iter()
        .partition(|f| f.is_creation() || f.is_deletion());
    let mut out = apply_patch_strict(tree, &Patch { files: whole })?;
    let (solution, mut errors) = patch_to_replace(&Patch { files: edits });
    if !errors.is_empty() {
        return Err(errors.remove(0).into());
    }
    out = apply_replace(&out, &solution)?;
    Ok(out)
}

/// Applies a candidate solution; patches always take the lenient path.
pub fn apply_solution(tree: &FileTree, solution: &Solution) -> Result<FileTree, ApplyError> {
    match solution {
        Solution::Replace(r) => Ok(apply_replace(tree, r)?),
        Solution::Patch(p) => apply_patch(tree, p, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(text: &str) -> FileTree {
        [("m.py".to_string(), text.to_string())].into_iter().collect()
    }

    #[test]
    fn offsets_matter_only_in_strict_mode() {
        let lines: Vec<String> = (1..=20).map(|i| format!("v{i} = {i}\n")).collect();
        let from = tree(&lines.concat());
        let mut changed = lines.clone();
        changed[9] = "v10 = 'ten'\n".into();
        let to = tree(&changed.concat());
        let text = make_patch(&from, &to);
        let mut p = parse_patch(&text).unwrap();
        p.files[0].hunks[0].shift(7);
        let shifted = p.to_string();

        assert_eq!(apply_patch(&from, &text, true).unwrap(), to);
        assert!(matches!(
            apply_patch(&from, &shifted, true),
            Err(ApplyError::Patch(PatchError::ContextMismatch { .. }))
        ));
        assert_eq!(apply_patch(&from, &shifted, false).unwrap(), to);
    }

    #[test]
    fn empty_patch_is_identity() {
        let t = tree("x\n");
        assert_eq!(apply_patch(&t, "", true).unwrap(), t);
        assert_eq!(apply_solution(&t, &Solution::empty(SolutionFormat::Patch)).unwrap(), t);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("patch".parse::<SolutionFormat>(), Ok(SolutionFormat::Patch));
        assert!("diff".parse::<SolutionFormat>().is_err());
        assert_eq!(SolutionFormat::Replace.to_string(), "replace");
    }
}
