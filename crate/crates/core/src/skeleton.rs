//! Partial codebases: the original tree with one step's target functions
//! reduced to documented stubs and its dependent functions deleted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use crate::node::FunctionNode;
use crate::pysrc::{index_sources, IndexError, PySource, SourceIndex};
use crate::scheduler::ScheduleStep;
use crate::tree::FileTree;

/// Statement every stub body ends with.
pub const UNIMPLEMENTED_MARKER: &str = "raise NotImplementedError";
/// Statement inserted when a deletion leaves a block empty.
pub const EMPTY_BLOCK_PLACEHOLDER: &str = "pass";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SkeletonError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("no docstring supplied for target {0}")]
    MissingDocstring(FunctionNode),
    #[error("{} skeletonization errors: {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Aggregate(Vec<SkeletonError>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRewrite {
    pub path: String,
    pub content: String,
}

/// The original checkout a partial codebase is derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseSnapshot {
    pub commit: String,
    pub root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialCodebase {
    pub base: BaseSnapshot,
    /// Rewritten files, sorted by path.
    pub edits: Vec<FileRewrite>,
    pub step_index: usize,
}

impl PartialCodebase {
    /// `tree` with this codebase's rewrites applied.
    pub fn apply_to(&self, tree: &FileTree) -> FileTree {
        let mut out = tree.clone();
        for e in &self.edits {
            out.insert(e.path.clone(), e.content.clone());
        }
        out
    }
}

fn render_docstring(doc: &str, indent: &str, eol: &str) -> Vec<String> {
    let escaped = doc.trim().replace('\\', "\\\\").replace("\"\"\"", "\\\"\\\"\\\"");
    let lines: Vec<&str> = escaped.lines().collect();
    match lines.as_slice() {
        [] => vec![format!("{indent}\"\"\"\"\"\"{eol}")],
        [one] => vec![format!("{indent}\"\"\"{one}\"\"\"{eol}")],
        [first, rest @ ..] => {
            let mut out = vec![format!("{indent}\"\"\"{first}{eol}")];
            for l in rest {
                if l.trim().is_empty() {
                    out.push(eol.to_string());
                } else {
                    out.push(format!("{indent}{}{eol}", l.trim_end()));
                }
            }
            out.push(format!("{indent}\"\"\"{eol}"));
            out
        }
    }
}

/// Replaces the body of `node` with `docstring` followed by a statement that
/// raises when called. Decorators, signature and the rest of the file are
/// left byte-identical.
pub fn skeletonize_tcfn(text: &str, node: &FunctionNode, docstring: &str) -> Result<String, SkeletonError> {
    let src = PySource::scan(&node.filepath, text)?;
    let span = src.locate(node)?;
    let eol = src.eol();
    let lines = src.lines();

    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    out.extend(lines[..span.header_span.end - 1].iter().map(|l| l.to_string()));
    let header_last = lines[span.header_span.end - 1];
    match span.inline_body_at {
        Some(col) => out.push(format!("{}{eol}", &header_last[..col])),
        None => out.push(header_last.to_string()),
    }
    out.extend(render_docstring(docstring, &span.body_indent, eol));
    out.push(format!("{}{UNIMPLEMENTED_MARKER}{eol}", span.body_indent));
    let tail = &lines[span.body_span.end..];
    if tail.is_empty() && !text.ends_with('\n') {
        if let Some(last) = out.last_mut() {
            last.truncate(last.len() - eol.len());
        }
    }
    out.extend(tail.iter().map(|l| l.to_string()));
    Ok(out.concat())
}

/// Deletes the full definition of `node`, decorators included. A block left
/// without statements receives a placeholder so the file still loads.
pub fn remove_dcfn(text: &str, node: &FunctionNode) -> Result<String, SkeletonError> {
    let src = PySource::scan(&node.filepath, text)?;
    let span = src.locate(node)?;
    let eol = src.eol();
    let lines = src.lines();
    let full = span.full_span();

    let needs_placeholder = match src.previous_code(full.start) {
        Some((_, true, opener_indent)) => match src.next_code_indent(full.end + 1) {
            Some(next) => next <= opener_indent,
            None => true,
        },
        _ => false,
    };

    let mut out: Vec<String> = lines[..full.start - 1].iter().map(|l| l.to_string()).collect();
    if needs_placeholder {
        out.push(format!("{}{EMPTY_BLOCK_PLACEHOLDER}{eol}", span.indent));
    }
    let tail = &lines[full.end..];
    if tail.is_empty() && !text.ends_with('\n') {
        if let Some(last) = out.last_mut() {
            let trimmed = last.trim_end_matches(['\n', '\r']).len();
            last.truncate(trimmed);
        }
    }
    out.extend(tail.iter().map(|l| l.to_string()));
    Ok(out.concat())
}

/// Index-based form of [`skeletonize_tcfn`].
pub fn skeletonize_indexed(
    tree: &FileTree,
    index: &SourceIndex,
    node: &FunctionNode,
    docstring: &str,
) -> Result<FileRewrite, SkeletonError> {
    index.get(node).ok_or_else(|| IndexError::NodeNotFound(node.clone()))?;
    let text = tree
        .get(&node.filepath)
        .ok_or_else(|| IndexError::FileMissing(node.filepath.clone()))?;
    Ok(FileRewrite {
        path: node.filepath.clone(),
        content: skeletonize_tcfn(text, node, docstring)?,
    })
}

/// Index-based form of [`remove_dcfn`].
pub fn remove_indexed(tree: &FileTree, index: &SourceIndex, node: &FunctionNode) -> Result<FileRewrite, SkeletonError> {
    index.get(node).ok_or_else(|| IndexError::NodeNotFound(node.clone()))?;
    let text = tree
        .get(&node.filepath)
        .ok_or_else(|| IndexError::FileMissing(node.filepath.clone()))?;
    Ok(FileRewrite {
        path: node.filepath.clone(),
        content: remove_dcfn(text, node)?,
    })
}

enum Op<'a> {
    Stub(&'a str),
    Remove,
}

/// Builds the partial codebase of one step: each new target becomes a stub
/// and each new dependent is deleted. Functions from other steps are left
/// alone. Within a file, edits run from the bottom up so recorded line
/// numbers stay valid.
pub fn make_partial_codebase(
    tree: &FileTree,
    base: BaseSnapshot,
    step: &ScheduleStep,
    docs: &BTreeMap<FunctionNode, String>,
) -> Result<PartialCodebase, SkeletonError> {
    let mut errors = Vec::new();
    let mut ops: BTreeMap<&str, Vec<(&FunctionNode, Op)>> = BTreeMap::new();
    for node in &step.new_tcfns {
        match docs.get(node) {
            Some(doc) if !doc.trim().is_empty() => ops.entry(&node.filepath).or_default().push((node, Op::Stub(doc))),
            _ => errors.push(SkeletonError::MissingDocstring(node.clone())),
        }
    }
    for node in &step.new_dcfns {
        ops.entry(&node.filepath).or_default().push((node, Op::Remove));
    }

    let all: BTreeSet<FunctionNode> = step.new_functions();
    if let Err(e) = index_sources(tree, &all) {
        errors.push(e.into());
    }

    let mut edits = Vec::new();
    for (path, mut file_ops) in ops {
        let Some(original) = tree.get(path) else {
            errors.push(IndexError::FileMissing(path.to_string()).into());
            continue;
        };
        file_ops.sort_by(|a, b| b.0.lineno.cmp(&a.0.lineno).then_with(|| b.0.name.cmp(&a.0.name)));
        let mut text = original.to_string();
        let mut failed = false;
        for (node, op) in file_ops {
            let r = match op {
                Op::Stub(doc) => skeletonize_tcfn(&text, node, doc),
                Op::Remove => remove_dcfn(&text, node),
            };
            match r {
                Ok(t) => text = t,
                Err(e) => {
                    if !errors.contains(&e) {
                        errors.push(e);
                    }
                    failed = true;
                }
            }
        }
        if !failed {
            edits.push(FileRewrite {
                path: path.to_string(),
                content: text,
            });
        }
    }
    match errors.len() {
        0 => Ok(PartialCodebase {
            base,
            edits,
            step_index: step.step_index,
        }),
        1 => Err(errors.pop().unwrap()),
        _ => Err(SkeletonError::Aggregate(errors)),
    }
}
