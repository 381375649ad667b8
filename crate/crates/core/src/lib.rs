//! Synthesis of verifiable test-driven development tasks from a repository's
//! unit tests, and evaluation of candidate solutions against them.

pub mod docgen;
pub mod eval;
pub mod filter;
pub mod node;
pub mod par;
pub mod pipeline;
pub mod proc;
pub mod pysrc;
pub mod rdg;
pub mod scheduler;
pub mod skeleton;
pub mod solutions;
pub mod tokenize;
pub mod tree;

pub use eval::{efficiency_value, evaluate_solution, pass_rate, EvalResult, PassRate};
pub use filter::{FilterRules, ProjectFilter};
pub use node::FunctionNode;
pub use pipeline::{compute_stats, make_lite_split, synthesize, DatasetStats, TaskInstance, Tier};
pub use rdg::{
    classify, core_coverage, dependency_depth, parse_trace_file, ClassifiedRdg, NodeClass, TestTrace, TraceStatus,
};
pub use scheduler::{build_schedule, merge_equivalent, Schedule, ScheduleEntry, ScheduleStep};
pub use solutions::{
    apply_patch, apply_replace, extract_solution, make_patch, patch_to_replace, ReplaceSolution, Solution,
    SolutionFormat,
};
pub use tree::FileTree;
