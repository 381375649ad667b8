//! Search/replace edit blocks in merge-conflict style.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::patch::{Patch, PatchError};
use crate::tree::FileTree;

pub const FILE_MARKER: &str = "### ";
pub const SEARCH_MARKER: &str = "<<<<<<< SEARCH";
pub const DIVIDER_MARKER: &str = "=======";
pub const REPLACE_MARKER: &str = ">>>>>>> REPLACE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaceBlock {
    pub filepath: String,
    pub search: String,
    pub replace: String,
}

/// Ordered edit blocks; blocks for one file apply in listed order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplaceSolution {
    pub blocks: Vec<ReplaceBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplaceError {
    #[error("block {block}: {path}: search text not found")]
    SearchNotFound { block: usize, path: String },
    #[error("block {block}: {path}: search text matches {count} times")]
    AmbiguousMatch { block: usize, path: String, count: usize },
    #[error("block {block}: {path}: file not found")]
    FileNotFound { block: usize, path: String },
    #[error("block {block}: {path}: empty search text")]
    EmptySearch { block: usize, path: String },
}

impl ReplaceSolution {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Interchange text: a `### <path>` header whenever the file changes,
    /// then the blocks.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for b in &self.blocks {
            if current != Some(b.filepath.as_str()) {
                let _ = writeln!(out, "{FILE_MARKER}{}", b.filepath);
                current = Some(&b.filepath);
            }
            let _ = writeln!(out, "{SEARCH_MARKER}");
            push_payload(&mut out, &b.search);
            let _ = writeln!(out, "{DIVIDER_MARKER}");
            push_payload(&mut out, &b.replace);
            let _ = writeln!(out, "{REPLACE_MARKER}");
        }
        out
    }
}

fn push_payload(out: &mut String, text: &str) {
    out.push_str(text);
    if !text.is_empty() && !text.ends_with('\n') {
        out.push('\n');
    }
}

fn uniformly_crlf(text: &str) -> bool {
    let lf = text.matches('\n').count();
    lf > 0 && text.matches("\r\n").count() == lf
}

fn to_lf(text: &str) -> String {
    text.replace("\r\n", "\n")
}

fn count_matches(hay: &str, needle: &str) -> (usize, Option<usize>) {
    let mut count = 0;
    let mut first = None;
    let mut from = 0;
    while let Some(pos) = hay[from..].find(needle) {
        let at = from + pos;
        first.get_or_insert(at);
        count += 1;
        from = at + hay[at..].chars().next().map_or(1, char::len_utf8);
    }
    (count, first)
}

/// Applies every block in order. Each search text must occur exactly once in
/// the file's current content; line endings are compared as `\n` and files
/// that used `\r\n` throughout are written back that way.
pub fn apply_replace(tree: &FileTree, solution: &ReplaceSolution) -> Result<FileTree, ReplaceError> {
    let mut out = tree.clone();
    for (i, b) in solution.blocks.iter().enumerate() {
        let block = i + 1;
        let path = b.filepath.clone();
        let Some(current) = out.get(&b.filepath) else {
            return Err(ReplaceError::FileNotFound { block, path });
        };
        let search = to_lf(&b.search);
        if search.is_empty() {
            return Err(ReplaceError::EmptySearch { block, path });
        }
        let crlf = uniformly_crlf(current);
        let text = if crlf { to_lf(current) } else { current.to_string() };
        let (count, first) = count_matches(&text, &search);
        let at = match (count, first) {
            (1, Some(at)) => at,
            (0, _) => return Err(ReplaceError::SearchNotFound { block, path }),
            _ => return Err(ReplaceError::AmbiguousMatch { block, path, count }),
        };
        let mut edited = String::with_capacity(text.len() + b.replace.len());
        edited.push_str(&text[..at]);
        edited.push_str(&to_lf(&b.replace));
        edited.push_str(&text[at + search.len()..]);
        if crlf {
            edited = edited.replace('\n', "\r\n");
        }
        out.insert(path, edited);
    }
    Ok(out)
}

/// Converts each hunk into one block: search = context + removed lines,
/// replace = context + added lines. Hunk line numbers are ignored. Hunks
/// that cannot be expressed as a block are reported and skipped.
pub fn patch_to_replace(patch: &Patch) -> (ReplaceSolution, Vec<PatchError>) {
    let mut blocks = Vec::new();
    let mut errors = Vec::new();
    let mut hunk_no = 0;
    for file in &patch.files {
        for h in &file.hunks {
            hunk_no += 1;
            let unusable = |reason: &str| PatchError::UnparsableHunk {
                hunk: hunk_no,
                line: 0,
                reason: format!("{}: {reason}", file.path()),
            };
            if file.is_creation() || file.is_deletion() {
                errors.push(unusable("file creation or deletion has no search text"));
                continue;
            }
            let search: String = h.old_lines().map(|l| to_lf(&l.file_text())).collect();
            if search.is_empty() {
                errors.push(unusable("hunk has no context or removed lines"));
                continue;
            }
            blocks.push(ReplaceBlock {
                filepath: file.path().to_string(),
                search,
                replace: h.new_lines().map(|l| to_lf(&l.file_text())).collect(),
            });
        }
    }
    (ReplaceSolution { blocks }, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::patch::parse_patch;

    fn one(path: &str, text: &str) -> FileTree {
        [(path.to_string(), text.to_string())].into_iter().collect()
    }

    fn block(path: &str, s: &str, r: &str) -> ReplaceBlock {
        ReplaceBlock {
            filepath: path.into(),
            search: s.into(),
            replace: r.into(),
        }
    }

    #[test]
    fn empty_solution_is_identity() {
        let t = one("a.py", "x\n");
        assert_eq!(apply_replace(&t, &ReplaceSolution::default()).unwrap(), t);
    }

    #[test]
    fn replaces_only_the_middle_line() {
        let t = one("a.py", "one\ntwo\nthree\n");
        let s = ReplaceSolution {
            blocks: vec![block("a.py", "two\n", "TWO\n")],
        };
        assert_eq!(apply_replace(&t, &s).unwrap().get("a.py"), Some("one\nTWO\nthree\n"));
    }

    #[test]
    fn match_errors_name_the_block() {
        let t = one("a.py", "x = 1\nx = 1\n");
        let s = ReplaceSolution {
            blocks: vec![
                block("a.py", "x = 1\nx = 1\n", "x = 1\nx = 1\nx = 1\n"),
                block("a.py", "x = 1\n", ""),
            ],
        };
        assert_eq!(
            apply_replace(&t, &s),
            Err(ReplaceError::AmbiguousMatch {
                block: 2,
                path: "a.py".into(),
                count: 3
            })
        );
        let s = ReplaceSolution {
            blocks: vec![block("a.py", "zzz", "")],
        };
        assert!(matches!(
            apply_replace(&t, &s),
            Err(ReplaceError::SearchNotFound { block: 1, .. })
        ));
        let s = ReplaceSolution {
            blocks: vec![block("b.py", "x", "")],
        };
        assert!(matches!(
            apply_replace(&t, &s),
            Err(ReplaceError::FileNotFound { block: 1, .. })
        ));
    }

    #[test]
    fn overlapping_occurrences_are_ambiguous() {
        let t = one("a.py", "aaa");
        let s = ReplaceSolution {
            blocks: vec![block("a.py", "aa", "b")],
        };
        assert!(matches!(
            apply_replace(&t, &s),
            Err(ReplaceError::AmbiguousMatch { count: 2, .. })
        ));
    }

    #[test]
    fn later_blocks_see_earlier_edits() {
        let t = one("a.py", "a\nb\n");
        let s = ReplaceSolution {
            blocks: vec![block("a.py", "a\n", "c\n"), block("a.py", "c\nb\n", "done\n")],
        };
        assert_eq!(apply_replace(&t, &s).unwrap().get("a.py"), Some("done\n"));
    }

    #[test]
    fn crlf_files_match_lf_blocks_and_keep_endings() {
        let t = one("w.py", "a\r\nb\r\n");
        let s = ReplaceSolution {
            blocks: vec![block("w.py", "b\r\n", "c\nd\n")],
        };
        assert_eq!(apply_replace(&t, &s).unwrap().get("w.py"), Some("a\r\nc\r\nd\r\n"));
    }

    #[test]
    fn six_line_hunk_converts_by_hand() {
        let text = "--- a/m.py\n+++ b/m.py\n@@ -1,4 +1,4 @@\n def f():\n-    raise NotImplementedError\n+    return 1\n \n x = 2\n";
        let (sol, errs) = patch_to_replace(&parse_patch(text).unwrap());
        assert!(errs.is_empty());
        assert_eq!(
            sol.blocks,
            vec![block(
                "m.py",
                "def f():\n    raise NotImplementedError\n\nx = 2\n",
                "def f():\n    return 1\n\nx = 2\n"
            )]
        );
    }

    #[test]
    fn render_grammar() {
        let s = ReplaceSolution {
            blocks: vec![
                block("a.py", "x\n", ""),
                block("a.py", "y\n", "z\n"),
                block("b.py", "q\n", "r\n"),
            ],
        };
        assert_eq!(
            s.render(),
            "### a.py\n<<<<<<< SEARCH\nx\n=======\n>>>>>>> REPLACE\n<<<<<<< SEARCH\ny\n=======\nz\n>>>>>>> REPLACE\n\
             ### b.py\n<<<<<<< SEARCH\nq\n=======\nr\n>>>>>>> REPLACE\n"
        );
    }
}
