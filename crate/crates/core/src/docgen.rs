//! Development documents and replacement docstrings, produced by an external
//! text-generation service in a two-shot setting or by a deterministic
//! template.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::node::FunctionNode;

pub const ENV_URL: &str = "TDDSYNTH_GEN_URL";
pub const ENV_MODEL: &str = "TDDSYNTH_GEN_MODEL";
pub const ENV_TOKEN: &str = "TDDSYNTH_GEN_TOKEN";

/// Generator id recorded when the template path produced the text.
pub const FALLBACK_GENERATOR: &str = "fallback";
pub const DEFAULT_MAX_LENGTH: u32 = 2048;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const MAX_ATTEMPTS: u32 = 3;
/// Ground-truth lines shorter than this (after trimming) are not checked for
/// leakage; they are too generic (`return x`, `pass`) to mean anything.
pub const LEAK_MIN_LINE_LEN: usize = 10;

const DOCUMENT_SYSTEM: &str = include_str!("../exemplars/document_system.txt");
const DOCUMENT_SHOTS: [(&str, &str); 2] = [
    (
        include_str!("../exemplars/document_shot1_input.txt"),
        include_str!("../exemplars/document_shot1_output.txt"),
    ),
    (
        include_str!("../exemplars/document_shot2_input.txt"),
        include_str!("../exemplars/document_shot2_output.txt"),
    ),
];
const DOCSTRING_SYSTEM: &str = include_str!("../exemplars/docstring_system.txt");
const DOCSTRING_SHOTS: [(&str, &str); 2] = [
    (
        include_str!("../exemplars/docstring_shot1_input.txt"),
        include_str!("../exemplars/docstring_shot1_output.txt"),
    ),
    (
        include_str!("../exemplars/docstring_shot2_input.txt"),
        include_str!("../exemplars/docstring_shot2_output.txt"),
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocgenError {
    #[error("generation service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("generation service returned no text")]
    EmptyGeneration,
    #[error("nothing to document")]
    EmptyInput,
    #[error("document contains ground-truth line {0:?}")]
    Leakage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotPair {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_text: String,
    pub shot_pairs: [ShotPair; 2],
    pub payload_text: String,
    pub max_length: u32,
    pub temperature: f32,
}

impl GenerationRequest {
    fn with_shots(system: &str, shots: &[(&str, &str); 2], payload: String, max_length: u32) -> Self {
        Self {
            system_text: system.to_string(),
            shot_pairs: shots.map(|(i, o)| ShotPair {
                input: i.to_string(),
                output: o.to_string(),
            }),
            payload_text: payload,
            max_length,
            temperature: 0.0,
        }
    }

    /// Hash of everything that shapes the generation, exemplars included.
    pub fn prompt_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        format!("sha256:{}", hex::encode(Sha256::digest(canonical)))
    }
}

/// Where a generated text came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub prompt_hash: String,
    pub generator: String,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub text: String,
    pub provenance: Provenance,
}

/// A text-generation backend.
pub trait TextGenerator: Sync {
    fn model_id(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<String, DocgenError>;
}

/// Client for a message-list HTTP endpoint. See `docs/API.md`.
pub struct HttpGenerator {
    url: String,
    model: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpGenerator {
    pub fn new(url: impl Into<String>, model: impl Into<String>, token: Option<String>) -> Result<Self, DocgenError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| DocgenError::ServiceUnavailable(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            model: model.into(),
            token,
            client,
        })
    }

    pub fn from_env() -> Result<Self, DocgenError> {
        let url =
            std::env::var(ENV_URL).map_err(|_| DocgenError::ServiceUnavailable(format!("{ENV_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into());
        Self::new(url, model, std::env::var(ENV_TOKEN).ok())
    }

    fn body(&self, req: &GenerationRequest) -> serde_json::Value {
        let mut messages = vec![json!({"role": "system", "content": req.system_text})];
        for shot in &req.shot_pairs {
            messages.push(json!({"role": "user", "content": shot.input}));
            messages.push(json!({"role": "assistant", "content": shot.output}));
        }
        messages.push(json!({"role": "user", "content": req.payload_text}));
        json!({
            "model": self.model,
            "temperature": req.temperature,
            "max_tokens": req.max_length,
            "messages": messages,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, String)> {
        let mut rb = self.client.post(&self.url).json(body);
        if let Some(t) = &self.token {
            rb = rb.bearer_auth(t);
        }
        let resp = rb.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err((
                status.is_server_error() || status.as_u16() == 429,
                format!("HTTP {status}"),
            ));
        }
        let v: serde_json::Value = resp.json().map_err(|e| (false, format!("bad response body: {e}")))?;
        response_text(&v).ok_or_else(|| {
            (
                false,
                "response has neither `text` nor `choices[0].message.content`".into(),
            )
        })
    }
}

fn response_text(v: &serde_json::Value) -> Option<String> {
    v.get("text")
        .or_else(|| v.pointer("/choices/0/message/content"))
        .and_then(|t| t.as_str())
        .map(str::to_string)
}

impl TextGenerator for HttpGenerator {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, DocgenError> {
        let body = self.body(request);
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 << attempt));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retry, msg)) => {
                    log::warn!("generation attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                    if !retry {
                        break;
                    }
                }
            }
        }
        Err(DocgenError::ServiceUnavailable(last))
    }
}

fn run(
    request: &GenerationRequest,
    client: Option<&dyn TextGenerator>,
    allow_fallback: bool,
    fallback: impl FnOnce() -> String,
) -> Result<Generated, DocgenError> {
    let prompt_hash = request.prompt_hash();
    let mut notes = Vec::new();
    if let Some(c) = client {
        match c.generate(request) {
            Ok(text) if !text.trim().is_empty() => {
                return Ok(Generated {
                    text,
                    provenance: Provenance {
                        prompt_hash,
                        generator: c.model_id().to_string(),
                        notes,
                    },
                })
            }
            Ok(_) => notes.push("service returned empty text; template used".to_string()),
            Err(e) if allow_fallback => notes.push(format!("{e}; template used")),
            Err(e) => return Err(e),
        }
    }
    Ok(Generated {
        text: fallback(),
        provenance: Provenance {
            prompt_hash,
            generator: FALLBACK_GENERATOR.to_string(),
            notes,
        },
    })
}

/// The service payload: every test source under a `### path:line name` header.
pub fn document_payload(sources: &[(FunctionNode, String)]) -> String {
    sources
        .iter()
        .map(|(n, src)| {
            format!(
                "### {}:{} {}\n```python\n{}\n```\n",
                n.filepath,
                n.lineno,
                n.name,
                src.trim_end()
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn document_request(sources: &[(FunctionNode, String)], max_length: u32) -> GenerationRequest {
    GenerationRequest::with_shots(DOCUMENT_SYSTEM, &DOCUMENT_SHOTS, document_payload(sources), max_length)
}

pub fn docstring_request(function_source: &str, max_length: u32) -> GenerationRequest {
    GenerationRequest::with_shots(
        DOCSTRING_SYSTEM,
        &DOCSTRING_SHOTS,
        function_source.trim_end().to_string(),
        max_length,
    )
}

/// Task document for a step's test functions. Without a client, or when the
/// service replies with nothing (or fails and `allow_fallback` is set), the
/// template from [`fallback_document`] is used.
pub fn generate_document(
    sources: &[(FunctionNode, String)],
    client: Option<&dyn TextGenerator>,
    allow_fallback: bool,
    max_length: u32,
) -> Result<Generated, DocgenError> {
    if sources.is_empty() {
        return Err(DocgenError::EmptyInput);
    }
    run(&document_request(sources, max_length), client, allow_fallback, || {
        fallback_document(sources)
    })
}

/// Replacement docstring for one function definition.
pub fn generate_docstring(
    function_source: &str,
    client: Option<&dyn TextGenerator>,
    allow_fallback: bool,
    max_length: u32,
) -> Result<Generated, DocgenError> {
    if function_source.trim().is_empty() {
        return Err(DocgenError::EmptyInput);
    }
    let mut g = run(
        &docstring_request(function_source, max_length),
        client,
        allow_fallback,
        || fallback_docstring(function_source),
    )?;
    g.text = strip_quotes(&g.text);
    Ok(g)
}

fn strip_quotes(text: &str) -> String {
    let t = text.trim();
    for q in ["\"\"\"", "'''"] {
        if let Some(inner) = t.strip_prefix(q).and_then(|s| s.strip_suffix(q)) {
            return inner.trim().to_string();
        }
    }
    t.to_string()
}

/// Fails when any ground-truth line (trimmed, at least
/// [`LEAK_MIN_LINE_LEN`] characters) occurs in `document`.
pub fn check_leakage<'a>(document: &str, gt_added: impl IntoIterator<Item = &'a str>) -> Result<(), DocgenError> {
    for line in gt_added {
        let t = line.trim();
        if t.chars().count() >= LEAK_MIN_LINE_LEN && document.contains(t) {
            return Err(DocgenError::Leakage(t.to_string()));
        }
    }
    Ok(())
}

const KEYWORDS: &[&str] = &[
    "and", "as", "assert", "async", "await", "class", "def", "del", "elif", "else", "except", "for", "from", "if",
    "import", "in", "is", "lambda", "not", "or", "raise", "return", "while", "with", "yield",
];

/// Walks code outside string literals and comments, calling `f` on every
/// character with its byte index.
fn for_code_chars(src: &str, mut f: impl FnMut(usize, char)) {
    let b = src.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c == b'#' {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'"' || c == b'\'' {
            let triple = b.get(i + 1) == Some(&c) && b.get(i + 2) == Some(&c);
            let width = if triple { 3 } else { 1 };
            i += width;
            while i < b.len() {
                if b[i] == b'\\' {
                    i += 2;
                    continue;
                }
                if b[i] == c && (!triple || (b.get(i + 1) == Some(&c) && b.get(i + 2) == Some(&c))) {
                    i += width;
                    break;
                }
                if !triple && b[i] == b'\n' {
                    break;
                }
                i += 1;
            }
            continue;
        }
        let ch = src[i..].chars().next().expect("char boundary");
        f(i, ch);
        i += ch.len_utf8();
    }
}

/// Names called in `src`, in order of first use. Definition names and
/// keywords are skipped.
pub fn called_names(src: &str) -> Vec<String> {
    let mut tokens: Vec<(String, usize)> = Vec::new();
    let mut opens: Vec<usize> = Vec::new();
    let mut current = String::new();
    let mut end = 0usize;
    for_code_chars(src, |i, ch| {
        if ch.is_alphanumeric() || ch == '_' {
            current.push(ch);
            end = i + ch.len_utf8();
            return;
        }
        if !current.is_empty() {
            tokens.push((std::mem::take(&mut current), end));
        }
        if ch == '(' {
            opens.push(i);
        }
    });
    if !current.is_empty() {
        tokens.push((current, end));
    }

    let mut out: Vec<String> = Vec::new();
    for (k, (tok, end)) in tokens.iter().enumerate() {
        let prev = k.checked_sub(1).map(|p| tokens[p].0.as_str());
        let called = opens.iter().any(|&o| o >= *end && src[*end..o].trim().is_empty());
        if called
            && !KEYWORDS.contains(&tok.as_str())
            && !matches!(prev, Some("def" | "class"))
            && !tok.starts_with(|c: char| c.is_ascii_digit())
            && !out.contains(tok)
        {
            out.push(tok.clone());
        }
    }
    out
}

fn bracket_depth_delta(line: &str) -> i64 {
    let mut d = 0;
    for_code_chars(line, |_, ch| match ch {
        '(' | '[' | '{' => d += 1,
        ')' | ']' | '}' => d -= 1,
        _ => {}
    });
    d
}

/// Statements selected by `keep`, verbatim, continuation lines joined.
fn statements(src: &str, keep: impl Fn(&str) -> bool) -> Vec<String> {
    let lines: Vec<&str> = src.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let t = lines[i].trim();
        if !keep(t) {
            i += 1;
            continue;
        }
        let mut stmt = t.to_string();
        let mut depth = bracket_depth_delta(lines[i]);
        while (depth > 0 || stmt.ends_with('\\')) && i + 1 < lines.len() {
            i += 1;
            stmt = format!("{} {}", stmt.trim_end_matches('\\').trim_end(), lines[i].trim());
            depth += bracket_depth_delta(lines[i]);
        }
        out.push(stmt);
        i += 1;
    }
    out
}

/// Assertion statements of a test body.
pub fn assertion_lines(src: &str) -> Vec<String> {
    statements(body_of(src), |t| {
        t.starts_with("assert ")
            || t.starts_with("assert(")
            || t.starts_with("self.assert")
            || t.starts_with("with pytest.raises")
            || t.starts_with("pytest.raises(")
    })
}

/// Decorators above the definition, such as parameter tables.
pub fn decorator_lines(src: &str) -> Vec<String> {
    let head = &src[..src.len() - body_of(src).len()];
    statements(head, |t| t.starts_with('@'))
}

/// `src` from its `def` line on.
fn body_of(src: &str) -> &str {
    let mut at = 0;
    for line in src.split_inclusive('\n') {
        let t = line.trim_start();
        if t.starts_with("def ") || t.starts_with("async def ") {
            return &src[at..];
        }
        at += line.len();
    }
    src
}

/// Deterministic task document built only from the tests themselves:
/// assertion statements and called names, quoted verbatim.
pub fn fallback_document(sources: &[(FunctionNode, String)]) -> String {
    let names: Vec<String> = sources.iter().map(|(n, _)| format!("`{}`", n.name)).collect();
    let mut doc = format!("# Task: implement the behaviour exercised by {}\n", names.join(", "));
    for (node, src) in sources {
        doc.push_str(&format!("\n## `{}` ({}:{})\n\n", node.name, node.filepath, node.lineno));
        let decorators = decorator_lines(src);
        if !decorators.is_empty() {
            doc.push_str("The test is declared with:\n");
            for d in decorators {
                doc.push_str(&format!("- `{d}`\n"));
            }
            doc.push('\n');
        }
        let asserts = assertion_lines(src);
        if asserts.is_empty() {
            doc.push_str("The test makes no assertions; it must run to completion without raising.\n");
        } else {
            doc.push_str("These assertions must hold:\n");
            for a in asserts {
                doc.push_str(&format!("- `{a}`\n"));
            }
        }
        let calls = called_names(body_of(src));
        let calls = if calls.is_empty() {
            "none".to_string()
        } else {
            calls.iter().map(|c| format!("`{c}`")).collect::<Vec<_>>().join(", ")
        };
        doc.push_str(&format!("\nCalls made by the test, in order of first use: {calls}.\n"));
    }
    doc
}

fn split_top_level(params: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i64;
    let mut start = 0;
    let mut cuts = Vec::new();
    for_code_chars(params, |i, ch| match ch {
        '(' | '[' | '{' => depth += 1,
        ')' | ']' | '}' => depth -= 1,
        ',' if depth == 0 => cuts.push(i),
        _ => {}
    });
    for c in cuts {
        parts.push(params[start..c].to_string());
        start = c + 1;
    }
    parts.push(params[start..].to_string());
    parts
}

/// Parameter names of the first `def` in `src`, excluding `self`/`cls` and
/// the bare `*` and `/` separators.
pub fn parameter_names(src: &str) -> (String, Vec<String>) {
    let Some(def_at) = src.find("def ") else {
        return (String::new(), Vec::new());
    };
    let rest = &src[def_at + 4..];
    let name: String = rest
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    let Some(open) = rest.find('(') else {
        return (name, Vec::new());
    };
    let mut depth = 0i64;
    let mut close = None;
    for_code_chars(&rest[open..], |i, ch| {
        if close.is_some() {
            return;
        }
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(open + i);
                }
            }
            _ => {}
        }
    });
    let Some(close) = close else { return (name, Vec::new()) };
    let params = split_top_level(&rest[open + 1..close])
        .into_iter()
        .filter_map(|p| {
            let p = p.split(['=', ':']).next().unwrap_or("").trim().to_string();
            match p.as_str() {
                "" | "*" | "/" | "self" | "cls" => None,
                _ => Some(p),
            }
        })
        .collect();
    (name, params)
}

/// Docstring built from the signature alone.
pub fn fallback_docstring(function_source: &str) -> String {
    let (name, params) = parameter_names(function_source);
    let mut doc = format!("Summary of {name}({}).", params.join(", "));
    if !params.is_empty() {
        doc.push_str("\n\nArgs:");
        for p in &params {
            doc.push_str(&format!("\n    {p}"));
        }
    }
    doc
}
