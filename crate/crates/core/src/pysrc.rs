//! Indentation-aware scanner for Python sources.
//!
//! This is not a parser. It tracks strings, brackets, comments and line
//! continuations well enough to find logical lines, and from those the
//! decorator, header, body and docstring spans of every `def`.

use std::collections::{BTreeMap, BTreeSet};

use crate::node::FunctionNode;
use crate::tree::FileTree;

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineKind {
    Blank,
    Comment,
    Code,
}

#[derive(Debug, Clone)]
struct LineInfo {
    /// Starts a logical line (not a continuation of a bracket, string or `\`).
    logical_start: bool,
    /// For logical starts: 0-based index of the last physical line.
    logical_end: usize,
    indent_width: usize,
    indent: String,
    kind: LineKind,
    /// For logical starts: first bracket-depth-0 colon, as (line, byte column).
    first_colon: Option<(usize, usize)>,
    /// For logical starts: the last significant character is a depth-0 colon.
    ends_with_colon: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("file {0} is not in the tree")]
    FileMissing(String),
    #[error("no definition of {0} at its recorded line")]
    NodeNotFound(FunctionNode),
    #[error("{path}:{line}: {message}")]
    ParseError { path: String, line: usize, message: String },
}

/// Spans of one function definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefinitionSpan {
    pub node: FunctionNode,
    /// First decorator line, or the header start when undecorated.
    pub decorator_start: usize,
    pub header_span: LineSpan,
    /// For a one-line definition (`def f(): return 1`) this equals the
    /// header's last line.
    pub body_span: LineSpan,
    pub docstring_span: Option<LineSpan>,
    /// Indentation of the `def` keyword.
    pub indent: String,
    /// Indentation of the body statements.
    pub body_indent: String,
    /// Byte column just past the header colon when the body shares the header line.
    pub inline_body_at: Option<usize>,
}

impl DefinitionSpan {
    /// Full definition including decorators.
    pub fn full_span(&self) -> LineSpan {
        LineSpan::new(self.decorator_start, self.body_span.end)
    }
}

/// A scanned file: its physical lines (with terminators) and logical structure.
#[derive(Debug, Clone)]
pub struct PySource<'a> {
    path: String,
    lines: Vec<&'a str>,
    info: Vec<LineInfo>,
}

fn indent_of(line: &str) -> (String, usize) {
    let mut width = 0;
    let mut end = 0;
    for (i, c) in line.char_indices() {
        match c {
            ' ' => width += 1,
            '\t' => width = (width / 8 + 1) * 8,
            '\x0c' => width = 0,
            _ => {
                end = i;
                return (line[..end].to_string(), width);
            }
        }
        end = i + c.len_utf8();
    }
    (line[..end].to_string(), width)
}

pub fn content_of(line: &str) -> &str {
    line.trim_end_matches(['\n', '\r'])
}

/// Checks whether `text` begins with a string literal that is the whole
/// statement (followed only by whitespace or a comment).
fn is_string_statement(text: &str) -> bool {
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() && i < 2 && matches!(b[i], b'r' | b'R' | b'u' | b'U' | b'b' | b'B' | b'f' | b'F') {
        i += 1;
    }
    if i >= b.len() || !(b[i] == b'"' || b[i] == b'\'') {
        return false;
    }
    let q = b[i];
    let triple = b.len() >= i + 3 && b[i + 1] == q && b[i + 2] == q;
    let mut j = if triple { i + 3 } else { i + 1 };
    loop {
        if j >= b.len() {
            return false;
        }
        if b[j] == b'\\' {
            j += 2;
            continue;
        }
        if triple {
            if b[j] == q && b.get(j + 1) == Some(&q) && b.get(j + 2) == Some(&q) {
                j += 3;
                break;
            }
        } else if b[j] == q {
            j += 1;
            break;
        }
        j += 1;
    }
    let rest = text[j..].trim_start();
    rest.is_empty() || rest.starts_with('#')
}

fn def_name(code: &str) -> Option<&str> {
    let rest = code
        .strip_prefix("async")
        .map(str::trim_start)
        .filter(|r| r.starts_with("def"));
    let rest = rest.or_else(|| Some(code).filter(|c| c.starts_with("def")))?;
    let rest = rest.strip_prefix("def")?;
    if !rest.starts_with(|c: char| c.is_whitespace()) {
        return None;
    }
    let rest = rest.trim_start();
    let end = rest
        .find(|c: char| !(c.is_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    let name = &rest[..end];
    (!name.is_empty() && !name.starts_with(|c: char| c.is_ascii_digit())).then_some(name)
}

impl<'a> PySource<'a> {
    pub fn scan(path: &str, text: &'a str) -> Result<Self, IndexError> {
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        let mut info: Vec<LineInfo> = Vec::with_capacity(lines.len());

        #[derive(Clone, Copy, PartialEq)]
        enum Str {
            None,
            Single(u8),
            Triple(u8),
        }
        let mut depth: usize = 0;
        let mut string = Str::None;
        let mut continued = false;
        let mut current_logical = 0usize;
        let mut string_start_line = 0usize;

        for (li, line) in lines.iter().enumerate() {
            let logical_start = !continued;
            let (indent, indent_width) = indent_of(line);
            let body = content_of(line);
            let kind = if !logical_start {
                LineKind::Code
            } else if body.trim().is_empty() {
                LineKind::Blank
            } else if body.trim_start().starts_with('#') {
                LineKind::Comment
            } else {
                LineKind::Code
            };
            if logical_start {
                current_logical = li;
            }
            info.push(LineInfo {
                logical_start,
                logical_end: li,
                indent_width,
                indent,
                kind,
                first_colon: None,
                ends_with_colon: false,
            });

            let b = body.as_bytes();
            let mut i = 0;
            let mut last_sig: Option<(usize, bool)> = None; // (col, is depth-0 colon)
            let mut backslash_cont = false;
            while i < b.len() {
                let c = b[i];
                match string {
                    Str::Triple(q) => {
                        if c == b'\\' {
                            i += 2;
                            continue;
                        }
                        if c == q && b.get(i + 1) == Some(&q) && b.get(i + 2) == Some(&q) {
                            string = Str::None;
                            last_sig = Some((i + 2, false));
                            i += 3;
                            continue;
                        }
                        i += 1;
                        continue;
                    }
                    Str::Single(q) => {
                        if c == b'\\' {
                            if i + 1 >= b.len() {
                                backslash_cont = true;
                            }
                            i += 2;
                            continue;
                        }
                        if c == q {
                            string = Str::None;
                            last_sig = Some((i, false));
                        }
                        i += 1;
                        continue;
                    }
                    Str::None => {}
                }
                match c {
                    b'#' => break,
                    b'"' | b'\'' => {
                        string_start_line = li;
                        if b.get(i + 1) == Some(&c) && b.get(i + 2) == Some(&c) {
                            string = Str::Triple(c);
                            i += 3;
                        } else {
                            string = Str::Single(c);
                            i += 1;
                        }
                        continue;
                    }
                    b'(' | b'[' | b'{' => depth += 1,
                    b')' | b']' | b'}' => depth = depth.saturating_sub(1),
                    b'\\' if i + 1 == b.len() => {
                        backslash_cont = true;
                        i += 1;
                        continue;
                    }
                    b':' if depth == 0 => {
                        let slot = &mut info[current_logical].first_colon;
                        if slot.is_none() {
                            *slot = Some((li, i));
                        }
                        last_sig = Some((i, true));
                        i += 1;
                        continue;
                    }
                    _ => {}
                }
                if !c.is_ascii_whitespace() {
                    last_sig = Some((i, false));
                }
                i += 1;
            }
            if let Str::Single(_) = string {
                if !backslash_cont {
                    // unterminated single-quoted string; Python rejects it, we recover
                    string = Str::None;
                }
            }
            if let Some((_, colon)) = last_sig {
                info[current_logical].ends_with_colon = colon;
            }
            continued = backslash_cont || depth > 0 || matches!(string, Str::Triple(_) | Str::Single(_));
            info[current_logical].logical_end = li;
        }
        if matches!(string, Str::Triple(_)) {
            return Err(IndexError::ParseError {
                path: path.to_string(),
                line: string_start_line + 1,
                message: "unterminated triple-quoted string".into(),
            });
        }
        if depth > 0 {
            return Err(IndexError::ParseError {
                path: path.to_string(),
                line: lines.len(),
                message: "unbalanced brackets at end of file".into(),
            });
        }
        Ok(Self {
            path: path.to_string(),
            lines,
            info,
        })
    }

    pub fn lines(&self) -> &[&'a str] {
        &self.lines
    }

    /// Line terminator used by the file (`\r\n` if its first line has one).
    pub fn eol(&self) -> &'static str {
        match self.lines.first() {
            Some(l) if l.ends_with("\r\n") => "\r\n",
            _ => "\n",
        }
    }

    fn code_logical_starts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.lines.len()).filter(|&i| self.info[i].logical_start && self.info[i].kind == LineKind::Code)
    }

    fn logical_text(&self, i: usize) -> String {
        self.lines[i..=self.info[i].logical_end]
            .concat()
            .trim_start()
            .to_string()
    }

    fn code_text(&self, i: usize) -> &str {
        content_of(self.lines[i]).trim_start()
    }

    /// Every function definition in the file, in source order.
    pub fn definitions(&self) -> Result<Vec<DefinitionSpan>, IndexError> {
        let starts: Vec<usize> = self.code_logical_starts().collect();
        let mut out = Vec::new();
        for (k, &i) in starts.iter().enumerate() {
            let Some(name) = def_name(self.code_text(i)) else {
                continue;
            };
            out.push(self.definition_at(&starts, k, name)?);
        }
        Ok(out)
    }

    fn definition_at(&self, starts: &[usize], k: usize, name: &str) -> Result<DefinitionSpan, IndexError> {
        let i = starts[k];
        let li = &self.info[i];
        let err = |message: &str| IndexError::ParseError {
            path: self.path.clone(),
            line: i + 1,
            message: message.to_string(),
        };
        let header_end = li.logical_end;
        let (colon_line, colon_col) = li.first_colon.ok_or_else(|| err("definition header without colon"))?;

        // decorators directly above at the same indentation
        let mut decorator_start = i;
        let mut kk = k;
        while kk > 0 {
            let p = starts[kk - 1];
            let pi = &self.info[p];
            let contiguous = (pi.logical_end + 1..decorator_start).all(|x| self.info[x].kind != LineKind::Code);
            if pi.indent_width == li.indent_width && self.code_text(p).starts_with('@') && contiguous {
                decorator_start = p;
                kk -= 1;
            } else {
                break;
            }
        }

        let after_colon = &content_of(self.lines[colon_line])[colon_col + 1..];
        let after = after_colon.trim_start();
        let inline = !after.is_empty() && !after.starts_with('#');
        let node = FunctionNode::new(self.path.clone(), (i + 1) as u32, name);
        let step = if li.indent.contains('\t') { "\t" } else { "    " };

        if inline {
            return Ok(DefinitionSpan {
                node,
                decorator_start: decorator_start + 1,
                header_span: LineSpan::new(i + 1, header_end + 1),
                body_span: LineSpan::new(colon_line + 1, header_end + 1),
                docstring_span: is_string_statement(after).then(|| LineSpan::new(colon_line + 1, header_end + 1)),
                indent: li.indent.clone(),
                body_indent: format!("{}{}", li.indent, step),
                inline_body_at: Some(colon_col + 1),
            });
        }

        // body: following lines indented deeper than the def
        let mut body_first: Option<usize> = None;
        let mut body_last = header_end;
        let mut x = header_end + 1;
        while x < self.lines.len() {
            let inf = &self.info[x];
            if !inf.logical_start {
                x += 1;
                continue;
            }
            match inf.kind {
                LineKind::Blank => {}
                LineKind::Comment => {
                    if inf.indent_width > li.indent_width && body_first.is_some() {
                        body_last = inf.logical_end;
                    }
                }
                LineKind::Code => {
                    if inf.indent_width <= li.indent_width {
                        break;
                    }
                    body_first.get_or_insert(x);
                    body_last = inf.logical_end;
                }
            }
            x = inf.logical_end + 1;
        }
        let first = body_first.ok_or_else(|| err("definition has no body"))?;
        let docstring_span = is_string_statement(&self.logical_text(first))
            .then(|| LineSpan::new(first + 1, self.info[first].logical_end + 1));
        Ok(DefinitionSpan {
            node,
            decorator_start: decorator_start + 1,
            header_span: LineSpan::new(i + 1, header_end + 1),
            body_span: LineSpan::new(header_end + 2, body_last + 1),
            docstring_span,
            indent: li.indent.clone(),
            body_indent: self.info[first].indent.clone(),
            inline_body_at: None,
        })
    }

    /// Finds the definition of `node`. The recorded line may be either the
    /// `def` line or the first decorator line (runtimes differ on this).
    pub fn locate(&self, node: &FunctionNode) -> Result<DefinitionSpan, IndexError> {
        let line = node.lineno as usize;
        self.definitions()?
            .into_iter()
            .find(|d| d.node.name == node.name && (d.header_span.start == line || d.decorator_start == line))
            .map(|mut d| {
                d.node = node.clone();
                d
            })
            .ok_or_else(|| IndexError::NodeNotFound(node.clone()))
    }

    /// Nearest code logical line that starts before 1-based `line`,
    /// as (0-based start index, ends with block colon, indent width).
    pub(crate) fn previous_code(&self, line: usize) -> Option<(usize, bool, usize)> {
        let mut found = None;
        for i in self.code_logical_starts() {
            if i + 1 >= line {
                break;
            }
            found = Some(i);
        }
        found.map(|i| (i, self.info[i].ends_with_colon, self.info[i].indent_width))
    }

    /// Indent width of the first code logical line starting at or after
    /// 1-based `line`.
    pub(crate) fn next_code_indent(&self, line: usize) -> Option<usize> {
        self.code_logical_starts()
            .find(|&i| i + 1 >= line)
            .map(|i| self.info[i].indent_width)
    }
}

/// Definition spans for the requested nodes, grouped by file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceIndex {
    pub files: BTreeMap<String, Vec<DefinitionSpan>>,
}

impl SourceIndex {
    pub fn get(&self, node: &FunctionNode) -> Option<&DefinitionSpan> {
        self.files.get(&node.filepath)?.iter().find(|d| &d.node == node)
    }
}

/// Resolves every node to its spans. Fails on the first file or node that
/// cannot be resolved; a mismatch is never guessed around.
pub fn index_sources(tree: &FileTree, nodes: &BTreeSet<FunctionNode>) -> Result<SourceIndex, IndexError> {
    let mut by_file: BTreeMap<&str, Vec<&FunctionNode>> = BTreeMap::new();
    for n in nodes {
        by_file.entry(n.filepath.as_str()).or_default().push(n);
    }
    let mut index = SourceIndex::default();
    for (path, nodes) in by_file {
        let text = tree
            .get(path)
            .ok_or_else(|| IndexError::FileMissing(path.to_string()))?;
        let src = PySource::scan(path, text)?;
        let defs = src.definitions()?;
        let mut spans = Vec::with_capacity(nodes.len());
        for node in nodes {
            let line = node.lineno as usize;
            let d = defs
                .iter()
                .find(|d| d.node.name == node.name && (d.header_span.start == line || d.decorator_start == line))
                .ok_or_else(|| IndexError::NodeNotFound(node.clone()))?;
            let mut d = d.clone();
            d.node = node.clone();
            spans.push(d);
        }
        index.files.insert(path.to_string(), spans);
    }
    Ok(index)
}

/// Source text of one definition (decorators through body).
pub fn definition_source(text: &str, span: &DefinitionSpan) -> String {
    text.split_inclusive('\n')
        .skip(span.decorator_start - 1)
        .take(span.full_span().len())
        .collect()
}
