//! Unified diffs: generation, parsing, and strict offset-based application.
//!
//! Parsing is tolerant of wrong hunk line numbers and counts; only the strict
//! applier ever looks at them.

use std::fmt;

use similar::TextDiff;

use crate::tree::FileTree;

/// Context lines around every change in generated diffs.
pub const CONTEXT_LINES: usize = 3;
pub const DEV_NULL: &str = "/dev/null";
const NO_NEWLINE: &str = "\\ No newline at end of file";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Context,
    Remove,
    Add,
}

impl LineKind {
    fn tag(self) -> char {
        match self {
            LineKind::Context => ' ',
            LineKind::Remove => '-',
            LineKind::Add => '+',
        }
    }
}

/// One body line of a hunk, without its terminating `\n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HunkLine {
    pub kind: LineKind,
    pub text: String,
    pub missing_newline: bool,
}

impl HunkLine {
    /// The line as it appears in a file, terminator included.
    pub fn file_text(&self) -> String {
        if self.missing_newline {
            self.text.clone()
        } else {
            format!("{}\n", self.text)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    /// Lines present before the hunk is applied (context and removals).
    pub fn old_lines(&self) -> impl Iterator<Item = &HunkLine> {
        self.lines.iter().filter(|l| l.kind != LineKind::Add)
    }

    /// Lines present after the hunk is applied (context and additions).
    pub fn new_lines(&self) -> impl Iterator<Item = &HunkLine> {
        self.lines.iter().filter(|l| l.kind != LineKind::Remove)
    }

    pub fn shift(&mut self, by: i64) {
        let mv = |v: usize| (v as i64 + by).max(0) as usize;
        self.old_start = mv(self.old_start);
        self.new_start = mv(self.new_start);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePatch {
    /// Path before the change, prefix stripped; [`DEV_NULL`] for created files.
    pub old_path: String,
    /// Path after the change, prefix stripped; [`DEV_NULL`] for deleted files.
    pub new_path: String,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    pub fn path(&self) -> &str {
        if self.new_path == DEV_NULL {
            &self.old_path
        } else {
            &self.new_path
        }
    }

    pub fn is_creation(&self) -> bool {
        self.old_path == DEV_NULL
    }

    pub fn is_deletion(&self) -> bool {
        self.new_path == DEV_NULL
    }
}

/// A parsed unified diff.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Patch {
    pub files: Vec<FilePatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatchError {
    #[error("hunk {hunk} (line {line} of patch): {reason}")]
    UnparsableHunk { hunk: usize, line: usize, reason: String },
    #[error("{path}: hunk {hunk} does not match at line {line}")]
    ContextMismatch { path: String, hunk: usize, line: usize },
    #[error("{path}: file not found")]
    FileNotFound { path: String },
    #[error("{path}: file already exists")]
    FileExists { path: String },
}

fn header_path(raw: &str) -> String {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end_matches('\r').trim();
    if raw == DEV_NULL {
        return raw.to_string();
    }
    raw.strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw)
        .to_string()
}

fn label(prefix: &str, path: &str) -> String {
    if path == DEV_NULL {
        DEV_NULL.to_string()
    } else {
        format!("{prefix}/{path}")
    }
}

/// Unified diff turning `from` into `to`, one section per differing file in
/// sorted path order. Identical trees give an empty string.
pub fn make_patch(from: &FileTree, to: &FileTree) -> String {
    let mut paths: Vec<&str> = from.paths().chain(to.paths()).collect();
    paths.sort_unstable();
    paths.dedup();

    let mut out = String::new();
    for p in paths {
        let (old, new) = (from.get(p), to.get(p));
        if old == new {
            continue;
        }
        let old_label = if old.is_some() { label("a", p) } else { DEV_NULL.into() };
        let new_label = if new.is_some() { label("b", p) } else { DEV_NULL.into() };
        let diff = TextDiff::from_lines(old.unwrap_or(""), new.unwrap_or(""));
        out.push_str(
            &diff
                .unified_diff()
                .context_radius(CONTEXT_LINES)
                .header(&old_label, &new_label)
                .to_string(),
        );
    }
    out
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<(usize, usize, usize, usize)> {
    let rest = line.strip_prefix("@@ ")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let (old, new) = ranges.split_once(' ')?;
    let (os, ol) = parse_range(old.strip_prefix('-')?)?;
    let (ns, nl) = parse_range(new.strip_prefix('+')?)?;
    Some((os, ol, ns, nl))
}

fn is_file_header(lines: &[&str], i: usize) -> bool {
    lines[i].starts_with("--- ")
        && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ "))
        && lines
            .get(i + 2)
            .is_none_or(|l| l.starts_with("@@") || l.trim().is_empty())
}

fn is_body_line(line: &str) -> bool {
    matches!(line.chars().next(), Some(' ' | '+' | '-' | '\\')) || line.is_empty() || line == "\r"
}

/// Parses a unified diff, collecting one error per malformed hunk. Malformed
/// hunks are skipped; everything else is kept. Text outside file sections
/// (prose, `diff --git` and `index` lines) is ignored.
pub fn parse_patch_lenient(text: &str) -> (Patch, Vec<PatchError>) {
    let lines: Vec<&str> = text.split('\n').collect();
    let lines = if lines.last() == Some(&"") {
        &lines[..lines.len() - 1]
    } else {
        &lines[..]
    };
    let mut patch = Patch::default();
    let mut errors = Vec::new();
    let mut hunk_no = 0usize;
    let mut i = 0;

    while i < lines.len() {
        if is_file_header(lines, i) {
            patch.files.push(FilePatch {
                old_path: header_path(&lines[i][4..]),
                new_path: header_path(&lines[i + 1][4..]),
                hunks: Vec::new(),
            });
            i += 2;
            continue;
        }
        if !lines[i].starts_with("@@") {
            i += 1;
            continue;
        }

        hunk_no += 1;
        let header_line = i + 1;
        let Some(file) = patch.files.last_mut() else {
            errors.push(PatchError::UnparsableHunk {
                hunk: hunk_no,
                line: header_line,
                reason: "hunk before any file header".into(),
            });
            i += 1;
            continue;
        };
        let Some((old_start, old_len, new_start, new_len)) = parse_hunk_header(lines[i]) else {
            errors.push(PatchError::UnparsableHunk {
                hunk: hunk_no,
                line: header_line,
                reason: format!("bad hunk header {:?}", lines[i]),
            });
            i += 1;
            while i < lines.len() && !lines[i].starts_with("@@") && !is_file_header(lines, i) {
                i += 1;
            }
            continue;
        };
        i += 1;

        let mut body: Vec<HunkLine> = Vec::new();
        let (mut seen_old, mut seen_new) = (0usize, 0usize);
        while i < lines.len() {
            let l = lines[i];
            let counted = seen_old >= old_len && seen_new >= new_len;
            if l.starts_with("@@") || (counted && is_file_header(lines, i)) || !is_body_line(l) {
                break;
            }
            // Past the declared counts, a bare blank line ends the hunk.
            if counted && (l.is_empty() || l == "\r" || l.starts_with("diff ")) {
                break;
            }
            if let Some(rest) = l.strip_prefix('\\') {
                if rest.trim_start().starts_with("No newline") {
                    if let Some(last) = body.last_mut() {
                        last.missing_newline = true;
                    }
                }
                i += 1;
                continue;
            }
            let (kind, content) = match l.chars().next() {
                Some('+') => (LineKind::Add, &l[1..]),
                Some('-') => (LineKind::Remove, &l[1..]),
                Some(' ') => (LineKind::Context, &l[1..]),
                _ => (LineKind::Context, l.trim_end_matches('\r')),
            };
            match kind {
                LineKind::Context => {
                    seen_old += 1;
                    seen_new += 1;
                }
                LineKind::Remove => seen_old += 1,
                LineKind::Add => seen_new += 1,
            }
            body.push(HunkLine {
                kind,
                text: content.to_string(),
                missing_newline: false,
            });
            i += 1;
        }
        while body
            .last()
            .is_some_and(|l| l.kind == LineKind::Context && l.text.is_empty())
            && body.len() > old_len.max(new_len)
        {
            body.pop();
        }
        if body.is_empty() {
            errors.push(PatchError::UnparsableHunk {
                hunk: hunk_no,
                line: header_line,
                reason: "empty hunk".into(),
            });
            continue;
        }
        file.hunks.push(Hunk {
            old_start,
            old_len,
            new_start,
            new_len,
            lines: body,
        });
    }
    patch.files.retain(|f| !f.hunks.is_empty());
    (patch, errors)
}

/// Parses a unified diff, failing on the first malformed hunk.
pub fn parse_patch(text: &str) -> Result<Patch, PatchError> {
    let (patch, mut errors) = parse_patch_lenient(text);
    match errors.is_empty() {
        true => Ok(patch),
        false => Err(errors.remove(0)),
    }
}

impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for file in &self.files {
            writeln!(f, "--- {}", label("a", &file.old_path))?;
            writeln!(f, "+++ {}", label("b", &file.new_path))?;
            for h in &file.hunks {
                let range = |start: usize, len: usize| match len {
                    1 => format!("{start}"),
                    _ => format!("{start},{len}"),
                };
                writeln!(
                    f,
                    "@@ -{} +{} @@",
                    range(h.old_start, h.old_len),
                    range(h.new_start, h.new_len)
                )?;
                for l in &h.lines {
                    writeln!(f, "{}{}", l.kind.tag(), l.text)?;
                    if l.missing_newline {
                        writeln!(f, "{NO_NEWLINE}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn split_keep(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

fn apply_file_strict(original: &str, file: &FilePatch) -> Result<String, PatchError> {
    let lines = split_keep(original);
    let mut out = String::with_capacity(original.len());
    let mut cursor = 0usize;
    for (n, h) in file.hunks.iter().enumerate() {
        let old: Vec<String> = h.old_lines().map(HunkLine::file_text).collect();
        let start = if old.is_empty() {
            h.old_start
        } else {
            h.old_start.saturating_sub(1)
        };
        let mismatch = |line: usize| PatchError::ContextMismatch {
            path: file.path().to_string(),
            hunk: n + 1,
            line,
        };
        if (h.old_start == 0 && !old.is_empty()) || start < cursor || start + old.len() > lines.len() {
            return Err(mismatch(h.old_start));
        }
        for (k, expect) in old.iter().enumerate() {
            if lines[start + k] != expect {
                return Err(mismatch(start + k + 1));
            }
        }
        out.extend(lines[cursor..start].iter().copied());
        out.extend(h.new_lines().map(HunkLine::file_text));
        cursor = start + old.len();
    }
    out.extend(lines[cursor..].iter().copied());
    Ok(out)
}

/// Applies `patch` exactly at its stated offsets.
pub fn apply_patch_strict(tree: &FileTree, patch: &Patch) -> Result<FileTree, PatchError> {
    let mut out = tree.clone();
    for file in &patch.files {
        let path = file.path().to_string();
        if file.is_creation() {
            if out.contains(&path) {
                return Err(PatchError::FileExists { path });
            }
            let created = apply_file_strict("", file)?;
            out.insert(path, created);
            continue;
        }
        let current = out
            .get(&path)
            .ok_or_else(|| PatchError::FileNotFound { path: path.clone() })?;
        let updated = apply_file_strict(current, file)?;
        if file.is_deletion() {
            if !updated.is_empty() {
                return Err(PatchError::ContextMismatch { path, hunk: 1, line: 1 });
            }
            out.remove(&path);
        } else {
            out.insert(path, updated);
        }
    }
    Ok(out)
}
