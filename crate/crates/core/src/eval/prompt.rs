//! Task prompts: role and answer grammar in the system turn, the partial
//! context files and the task document in the user turn.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::pipeline::TaskInstance;
use crate::solutions::{make_patch, ReplaceBlock, ReplaceSolution, SolutionFormat};
use crate::tree::FileTree;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub user_text: String,
}

const ROLE: &str = "You are an experienced software engineer. You are given part of a \
code repository in which some functions are missing or left as stubs that raise \
NotImplementedError, together with a development task. Implement the task so that \
its unit tests pass. Change only what the task requires.";

fn example_trees() -> (FileTree, FileTree) {
    let before = "def area(w, h):\n    \"\"\"Area of a w-by-h rectangle.\"\"\"\n    raise NotImplementedError\n";
    let after = "def area(w, h):\n    \"\"\"Area of a w-by-h rectangle.\"\"\"\n    return w * h\n";
    let t = |s: &str| {
        [("geometry/shapes.py".to_string(), s.to_string())]
            .into_iter()
            .collect()
    };
    (t(before), t(after))
}

fn grammar(format: SolutionFormat) -> String {
    match format {
        SolutionFormat::Replace => {
            let example = ReplaceSolution {
                blocks: vec![ReplaceBlock {
                    filepath: "geometry/shapes.py".into(),
                    search: "    raise NotImplementedError\n".into(),
                    replace: "    return w * h\n".into(),
                }],
            };
            format!(
                "Answer format: search/replace blocks.\n\
                 Start the edits for each file with a line `### <path>`. Then write one block per edit:\n\
                 a line `<<<<<<< SEARCH`, the exact lines to find, a line `=======`, the new lines, \
                 and a line `>>>>>>> REPLACE`.\n\
                 Each search text must match exactly one place in the current file, indentation \
                 included. Blocks are applied in order.\n\n\
                 Example:\n{}",
                example.render()
            )
        }
        SolutionFormat::Patch => {
            let (before, after) = example_trees();
            format!(
                "Answer format: a unified diff.\n\
                 Start each file with `--- a/<path>` and `+++ b/<path>` lines, then `@@` hunks whose \
                 lines begin with a space (context), `-` (removed) or `+` (added). Put the diff in a \
                 ```diff fenced block.\n\n\
                 Example:\n```diff\n{}```\n",
                make_patch(&before, &after)
            )
        }
    }
}

fn restatement(format: SolutionFormat) -> &'static str {
    match format {
        SolutionFormat::Replace => {
            "Reply with search/replace blocks as described: a `### <path>` line per file, then \
             `<<<<<<< SEARCH` / `=======` / `>>>>>>> REPLACE` blocks."
        }
        SolutionFormat::Patch => "Reply with a single unified diff in a ```diff fenced block as described.",
    }
}

/// Prompt for `instance` given its partial tree. Deterministic for fixed inputs.
pub fn build_prompt(instance: &TaskInstance, partial: &FileTree, format: SolutionFormat) -> Result<Prompt, EvalError> {
    if instance.task_document.trim().is_empty() {
        return Err(EvalError::MaterializationFailed(format!(
            "{}: no task document",
            instance.instance_id
        )));
    }
    let mut user = String::from("Repository files relevant to the task:\n\n");
    for path in &instance.context_files {
        let content = partial.get(path).ok_or_else(|| {
            EvalError::MaterializationFailed(format!("{}: context file {path} missing", instance.instance_id))
        })?;
        user.push_str(&format!("### {path}\n```python\n{content}"));
        if !content.ends_with('\n') {
            user.push('\n');
        }
        user.push_str("```\n\n");
    }
    user.push_str("Task:\n\n");
    user.push_str(instance.task_document.trim_end());
    user.push_str("\n\n");
    user.push_str(restatement(format));
    user.push('\n');
    Ok(Prompt {
        system_text: format!("{ROLE}\n\n{}", grammar(format)),
        user_text: user,
    })
}
