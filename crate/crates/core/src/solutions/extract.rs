//! Pulling solutions out of free-form model responses.

use super::patch::parse_patch_lenient;
use super::replace::{ReplaceBlock, ReplaceSolution, DIVIDER_MARKER, FILE_MARKER, REPLACE_MARKER, SEARCH_MARKER};
use super::{Solution, SolutionFormat};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no solution found in response")]
    NoSolutionFound,
    #[error("malformed block at byte {offset}: {reason}")]
    MalformedBlock { offset: usize, reason: String },
}

struct Line<'a> {
    offset: usize,
    raw: &'a str,
}

impl Line<'_> {
    fn content(&self) -> &str {
        self.raw.trim_end_matches(['\n', '\r'])
    }

    fn is(&self, marker: &str) -> bool {
        self.content() == marker
    }

    fn is_fence(&self) -> bool {
        self.content().trim_start().starts_with("```")
    }
}

fn lines_of(text: &str) -> Vec<Line<'_>> {
    let mut offset = 0;
    text.split_inclusive('\n')
        .map(|raw| {
            let l = Line { offset, raw };
            offset += raw.len();
            l
        })
        .collect()
}

fn payload(lines: &[Line<'_>]) -> String {
    let mut body = lines;
    if body.first().is_some_and(Line::is_fence) {
        body = &body[1..];
    }
    if body.last().is_some_and(Line::is_fence) {
        body = &body[..body.len() - 1];
    }
    let mut s: String = body.iter().map(|l| l.raw).collect();
    if !s.is_empty() && !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn extract_replace(text: &str) -> Result<ReplaceSolution, ExtractError> {
    let lines = lines_of(text);
    let mut blocks = Vec::new();
    let mut file: Option<String> = None;
    let mut i = 0;
    while i < lines.len() {
        let l = &lines[i];
        if let Some(path) = l.content().strip_prefix(FILE_MARKER) {
            let path = path.trim().trim_matches('`');
            if !path.is_empty() {
                file = Some(path.to_string());
            }
            i += 1;
            continue;
        }
        if !l.is(SEARCH_MARKER) {
            i += 1;
            continue;
        }
        let open = l.offset;
        let malformed = |reason: &str| ExtractError::MalformedBlock {
            offset: open,
            reason: reason.to_string(),
        };
        let Some(filepath) = file.clone() else {
            return Err(malformed("block has no preceding file header"));
        };
        let divider = (i + 1..lines.len())
            .find(|&k| lines[k].is(DIVIDER_MARKER) || lines[k].is(SEARCH_MARKER))
            .filter(|&k| lines[k].is(DIVIDER_MARKER))
            .ok_or_else(|| malformed("unterminated search section"))?;
        let close = (divider + 1..lines.len())
            .find(|&k| lines[k].is(REPLACE_MARKER) || lines[k].is(SEARCH_MARKER))
            .filter(|&k| lines[k].is(REPLACE_MARKER))
            .ok_or_else(|| malformed("unterminated replace section"))?;
        blocks.push(ReplaceBlock {
            filepath,
            search: payload(&lines[i + 1..divider]),
            replace: payload(&lines[divider + 1..close]),
        });
        i = close + 1;
    }
    match blocks.is_empty() {
        true => Err(ExtractError::NoSolutionFound),
        false => Ok(ReplaceSolution { blocks }),
    }
}

fn looks_like_diff(lines: &[Line<'_>], i: usize) -> bool {
    let l = lines[i].content();
    l.starts_with("diff --git ")
        || (l.starts_with("--- ") && lines.get(i + 1).is_some_and(|n| n.content().starts_with("+++ ")))
}

fn extract_patch(text: &str) -> Result<String, ExtractError> {
    let lines = lines_of(text);
    let mut i = 0;
    while i < lines.len() {
        if lines[i].is_fence() {
            let end = (i + 1..lines.len())
                .find(|&k| lines[k].is_fence())
                .unwrap_or(lines.len());
            if (i + 1..end).any(|k| looks_like_diff(&lines, k)) {
                let region: String = lines[i + 1..end].iter().map(|l| l.raw).collect();
                if !parse_patch_lenient(&region).0.files.is_empty() {
                    return Ok(region);
                }
            }
            i = end + 1;
            continue;
        }
        if looks_like_diff(&lines, i) {
            let end = (i..lines.len()).find(|&k| lines[k].is_fence()).unwrap_or(lines.len());
            let region: String = lines[i..end].iter().map(|l| l.raw).collect();
            if !parse_patch_lenient(&region).0.files.is_empty() {
                return Ok(region);
            }
        }
        i += 1;
    }
    Err(ExtractError::NoSolutionFound)
}

/// Replace: every well-formed block in order, each bound to the nearest
/// preceding `### <path>` header. Patch: the first fenced or bare unified
/// diff region.
pub fn extract_solution(response: &str, format: SolutionFormat) -> Result<Solution, ExtractError> {
    match format {
        SolutionFormat::Replace => extract_replace(response).map(Solution::Replace),
        SolutionFormat::Patch => extract_patch(response).map(Solution::Patch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fenced_block() {
        let r = "Here you go:\n```python\n### pkg/a.py\n<<<<<<< SEARCH\n    raise NotImplementedError\n=======\n    return x + y\n>>>>>>> REPLACE\n```\n";
        let Solution::Replace(s) = extract_solution(r, SolutionFormat::Replace).unwrap() else {
            panic!()
        };
        assert_eq!(
            s.blocks,
            vec![ReplaceBlock {
                filepath: "pkg/a.py".into(),
                search: "    raise NotImplementedError\n".into(),
                replace: "    return x + y\n".into(),
            }]
        );
    }

    #[test]
    fn prose_only() {
        assert_eq!(
            extract_solution("I think the bug is in add().", SolutionFormat::Replace),
            Err(ExtractError::NoSolutionFound)
        );
        assert_eq!(
            extract_solution("no diff here", SolutionFormat::Patch),
            Err(ExtractError::NoSolutionFound)
        );
    }

    #[test]
    fn nearest_header_wins() {
        let r = "First file.\n### a.py\nsome words\n<<<<<<< SEARCH\nx\n=======\ny\n>>>>>>> REPLACE\n\nThen:\n### b.py\n<<<<<<< SEARCH\np\n=======\n>>>>>>> REPLACE\n";
        let Solution::Replace(s) = extract_solution(r, SolutionFormat::Replace).unwrap() else {
            panic!()
        };
        assert_eq!(s.blocks.len(), 2);
        assert_eq!(
            (s.blocks[0].filepath.as_str(), s.blocks[1].filepath.as_str()),
            ("a.py", "b.py")
        );
        assert_eq!(s.blocks[1].replace, "");
    }

    #[test]
    fn unterminated_block_reports_offset() {
        let r = "### a.py\n<<<<<<< SEARCH\nx\n=======\ny\n";
        assert_eq!(
            extract_solution(r, SolutionFormat::Replace),
            Err(ExtractError::MalformedBlock {
                offset: 9,
                reason: "unterminated replace section".into()
            })
        );
        let r = "<<<<<<< SEARCH\nx\n=======\n>>>>>>> REPLACE\n";
        assert!(matches!(
            extract_solution(r, SolutionFormat::Replace),
            Err(ExtractError::MalformedBlock { offset: 0, .. })
        ));
    }

    #[test]
    fn patch_fenced_and_bare() {
        let d = "--- a/x.py\n+++ b/x.py\n@@ -1 +1 @@\n-a\n+b\n";
        let fenced = format!("Sure.\n```diff\n{d}```\nDone.\n");
        assert_eq!(
            extract_solution(&fenced, SolutionFormat::Patch),
            Ok(Solution::Patch(d.into()))
        );
        let bare = format!("Patch follows\n{d}");
        assert_eq!(
            extract_solution(&bare, SolutionFormat::Patch),
            Ok(Solution::Patch(d.into()))
        );
    }
}
