//! In-memory file trees keyed by repo-relative path.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

/// Directory names never copied, hashed, or loaded.
pub const IGNORED_DIRS: &[&str] = &[
    ".git",
    ".hg",
    ".svn",
    "__pycache__",
    ".pytest_cache",
    ".mypy_cache",
    ".ruff_cache",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileTree {
    files: BTreeMap<String, String>,
}

fn rel_path(root: &Path, path: &Path) -> Option<String> {
    let rel = path.strip_prefix(root).ok()?;
    let parts: Vec<_> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    Some(parts.join("/"))
}

fn walk(root: &Path) -> impl Iterator<Item = walkdir::DirEntry> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| !(e.file_type().is_dir() && IGNORED_DIRS.contains(&e.file_name().to_string_lossy().as_ref())))
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
}

impl FileTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every UTF-8 file under `root`. Non-text files are skipped.
    pub fn load_dir(root: &Path) -> io::Result<Self> {
        let mut files = BTreeMap::new();
        for entry in walk(root) {
            let Some(rel) = rel_path(root, entry.path()) else {
                continue;
            };
            match String::from_utf8(fs::read(entry.path())?) {
                Ok(text) => {
                    files.insert(rel, text);
                }
                Err(_) => log::debug!("skipping non-UTF-8 file {rel}"),
            }
        }
        Ok(Self { files })
    }

    /// Loads only the listed files.
    pub fn load_files<'a>(root: &Path, paths: impl IntoIterator<Item = &'a str>) -> io::Result<Self> {
        let mut files = BTreeMap::new();
        for p in paths {
            let text = fs::read_to_string(root.join(p)).map_err(|e| io::Error::new(e.kind(), format!("{p}: {e}")))?;
            files.insert(p.to_string(), text);
        }
        Ok(Self { files })
    }

    pub fn write_to(&self, root: &Path) -> io::Result<()> {
        for (p, text) in &self.files {
            let dest = root.join(p);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(dest, text)?;
        }
        Ok(())
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    pub fn insert(&mut self, path: impl Into<String>, content: impl Into<String>) {
        self.files.insert(path.into(), content.into());
    }

    pub fn remove(&mut self, path: &str) -> Option<String> {
        self.files.remove(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.files.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// The subset of this tree restricted to `paths` (missing paths ignored).
    pub fn subset<'a>(&self, paths: impl IntoIterator<Item = &'a str>) -> Self {
        let files = paths
            .into_iter()
            .filter_map(|p| self.files.get(p).map(|c| (p.to_string(), c.clone())))
            .collect();
        Self { files }
    }
}

impl FromIterator<(String, String)> for FileTree {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Self {
            files: iter.into_iter().collect(),
        }
    }
}

/// Content digest of a directory: every file (any encoding) hashed with its
/// relative path, in sorted order. Used as the revision id of checkouts that
/// carry no version-control metadata.
pub fn tree_digest(root: &Path) -> io::Result<String> {
    let mut h = Sha256::new();
    for entry in walk(root) {
        let Some(rel) = rel_path(root, entry.path()) else {
            continue;
        };
        let bytes = fs::read(entry.path())?;
        h.update(rel.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(format!("tree-sha256:{}", hex::encode(h.finalize())))
}

/// Copies a checkout, skipping [`IGNORED_DIRS`].
pub fn copy_dir(src: &Path, dst: &Path) -> io::Result<()> {
    fs::create_dir_all(dst)?;
    for entry in walk(src) {
        let Some(rel) = rel_path(src, entry.path()) else {
            continue;
        };
        let dest = dst.join(&rel);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::copy(entry.path(), dest)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_copy_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("pkg/__pycache__")).unwrap();
        fs::write(root.join("pkg/a.py"), "x = 1\n").unwrap();
        fs::write(root.join("pkg/__pycache__/a.pyc"), [0xff, 0x00]).unwrap();
        fs::write(root.join("blob.bin"), [0xff, 0xfe]).unwrap();

        let tree = FileTree::load_dir(root).unwrap();
        assert_eq!(tree.paths().collect::<Vec<_>>(), ["pkg/a.py"]);

        let d1 = tree_digest(root).unwrap();
        let copy = tempfile::tempdir().unwrap();
        copy_dir(root, copy.path()).unwrap();
        assert!(!copy.path().join("pkg/__pycache__").exists());
        assert_eq!(tree_digest(copy.path()).unwrap(), d1);

        fs::write(copy.path().join("pkg/a.py"), "x = 2\n").unwrap();
        assert_ne!(tree_digest(copy.path()).unwrap(), d1);
    }
}
