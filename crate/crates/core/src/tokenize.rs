//! Token counting for dataset statistics.

/// Counts tokens in text. Absolute numbers depend on the implementation, so
/// its name is recorded next to every count.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Whitespace-delimited words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Looks a tokenizer up by its configured name.
pub fn tokenizer_by_name(name: &str) -> Option<Box<dyn Tokenizer>> {
    match name {
        "whitespace" => Some(Box::new(WhitespaceTokenizer)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_counts() {
        let t = tokenizer_by_name("whitespace").unwrap();
        assert_eq!(t.count("def f(x):\n    return x  \n"), 4);
        assert_eq!(t.count(""), 0);
        assert!(tokenizer_by_name("bpe").is_none());
    }
}
