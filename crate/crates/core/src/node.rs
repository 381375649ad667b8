//! Function identity shared by every stage of the toolchain.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A traced function, identified by where it is defined.
///
/// Ordering is lexicographic on `(filepath, lineno, name)`, which is also the
/// canonical order used for coverage sets and schedule tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionNode {
    pub filepath: String,
    pub lineno: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NodeError {
    #[error("filepath must be non-empty")]
    EmptyPath,
    #[error("filepath `{0}` must be relative")]
    AbsolutePath(String),
    #[error("filepath `{0}` contains `.`, `..` or empty segments")]
    BadSegment(String),
    #[error("lineno must be >= 1 (got {0})")]
    ZeroLine(u32),
    #[error("function name must be non-empty")]
    EmptyName,
}

impl FunctionNode {
    pub fn new(filepath: impl Into<String>, lineno: u32, name: impl Into<String>) -> Self {
        Self {
            filepath: filepath.into(),
            lineno,
            name: name.into(),
        }
    }

    /// Checks the identity invariants: repo-relative forward-slash path
    /// without dot segments, 1-based line, non-empty name.
    pub fn validate(&self) -> Result<(), NodeError> {
        if self.filepath.is_empty() {
            return Err(NodeError::EmptyPath);
        }
        if self.filepath.starts_with('/') || self.filepath.contains('\\') || has_drive(&self.filepath) {
            return Err(NodeError::AbsolutePath(self.filepath.clone()));
        }
        if self
            .filepath
            .split('/')
            .any(|seg| seg.is_empty() || seg == "." || seg == "..")
        {
            return Err(NodeError::BadSegment(self.filepath.clone()));
        }
        if self.lineno == 0 {
            return Err(NodeError::ZeroLine(self.lineno));
        }
        if self.name.is_empty() {
            return Err(NodeError::EmptyName);
        }
        Ok(())
    }
}

fn has_drive(path: &str) -> bool {
    let b = path.as_bytes();
    b.len() >= 2 && b[0].is_ascii_alphabetic() && b[1] == b':'
}

impl fmt::Display for FunctionNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.filepath, self.lineno, self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_path_then_line_then_name() {
        let mut v = [
            FunctionNode::new("b.py", 1, "a"),
            FunctionNode::new("a.py", 9, "z"),
            FunctionNode::new("a.py", 9, "b"),
            FunctionNode::new("a.py", 10, "a"),
        ];
        v.sort();
        let names: Vec<_> = v.iter().map(|n| n.to_string()).collect();
        assert_eq!(names, ["a.py:9:b", "a.py:9:z", "a.py:10:a", "b.py:1:a"]);
    }

    #[test]
    fn rejects_bad_identities() {
        assert_eq!(FunctionNode::new("", 1, "f").validate(), Err(NodeError::EmptyPath));
        assert!(matches!(
            FunctionNode::new("/abs/x.py", 1, "f").validate(),
            Err(NodeError::AbsolutePath(_))
        ));
        assert!(matches!(
            FunctionNode::new("a/../x.py", 1, "f").validate(),
            Err(NodeError::BadSegment(_))
        ));
        assert!(matches!(
            FunctionNode::new("./x.py", 1, "f").validate(),
            Err(NodeError::BadSegment(_))
        ));
        assert_eq!(
            FunctionNode::new("x.py", 0, "f").validate(),
            Err(NodeError::ZeroLine(0))
        );
        assert_eq!(FunctionNode::new("x.py", 1, "").validate(), Err(NodeError::EmptyName));
        assert!(FunctionNode::new("pkg/x.py", 3, "f").validate().is_ok());
    }
}
