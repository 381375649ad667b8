//! Command-line front end: dataset synthesis, splits and evaluation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use tddsynth_core::docgen::TextGenerator;
use tddsynth_core::eval::{
    build_report, materialize, materialize_into, pass_rate, prompt::build_prompt, EvalReport, RunnerConfig,
};
use tddsynth_core::par::bounded_map;
use tddsynth_core::pipeline::dataset::{self, SCHEDULE_FILE, SPLITS_DIR, STATS_FILE, TRACES_DIR};
use tddsynth_core::pipeline::{
    client_for, collect_tests, fixture_test_ids, read_trace_dir, run_pipeline, run_traces, schedule_traces, Config,
    DatasetStats, TraceMode,
};
use tddsynth_core::solutions::{apply_solution, extract_solution};
use tddsynth_core::{
    compute_stats, efficiency_value, make_lite_split, make_patch, EvalResult, FileTree, Solution, SolutionFormat,
    TaskInstance,
};

#[derive(Parser)]
#[command(
    name = "tddsynth",
    version,
    about = "Synthesize and evaluate incremental test-driven development tasks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Project configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset root; each project lives in `<out>/<project>/`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Concurrent tracing and evaluation jobs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Solution format for prompts, extraction and gold runs.
    #[arg(long, global = true, default_value = "replace")]
    format: SolutionFormat,
    /// Steps per project in the Lite split.
    #[arg(long, global = true)]
    lite_n: Option<usize>,
    /// Per-command timeout in seconds.
    #[arg(long, global = true)]
    timeout_secs: Option<u64>,
    /// Read recorded traces from this directory instead of running the shim.
    #[arg(long, global = true)]
    fixture_traces: Option<PathBuf>,
    /// Config override `key=value`; dotted keys reach into tables.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// List the project's test ids.
    CollectTests,
    /// Trace every test into `<out>/<project>/traces/`.
    Trace,
    /// Build the development schedule from trace files.
    Schedule {
        /// Directory of trace files; defaults to the project's traces.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Run the full pipeline and write the dataset.
    Synthesize,
    /// Recompute per-project statistics from written instances.
    Stats,
    /// Write split files listing instance ids.
    Split {
        /// Also write the Lite split.
        #[arg(long)]
        lite: bool,
    },
    /// Evaluate solutions against instances.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Write an instance's partial codebase to a directory.
    Materialize {
        /// Instance id or path to an instance file.
        instance: String,
        #[arg(long)]
        dest: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Print the prompt for an instance.
    Prompt { instance: String },
    /// Extract a solution from a response and apply it to the partial codebase.
    Apply {
        instance: String,
        /// File holding the model response.
        #[arg(long)]
        response: PathBuf,
        /// Write the edited codebase here.
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Run instance tests against solutions and report pass rates.
    Run {
        /// Use each instance's ground-truth solution.
        #[arg(long, conflicts_with_all = ["empty", "responses"])]
        gold: bool,
        /// Use an empty solution (the partial codebase as is).
        #[arg(long, conflicts_with = "responses")]
        empty: bool,
        /// Directory of `<instance_id>.txt` model responses.
        #[arg(long)]
        responses: Option<PathBuf>,
        /// Restrict to these instance ids.
        #[arg(long = "instance")]
        instances: Vec<String>,
        /// JSON object mapping instance id to iterations used.
        #[arg(long)]
        iterations: Option<PathBuf>,
        /// Also run the tests of every earlier step.
        #[arg(long)]
        cumulative: bool,
        /// Where to write the report; defaults to `<out>/<project>/eval/results.json`.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Summarize a results file.
    Score {
        #[arg(long)]
        results: PathBuf,
        /// Iterations charged to results without a count.
        #[arg(long, default_value_t = 30)]
        max_iterations: u32,
    },
}

struct Ctx {
    global: Global,
}

impl Ctx {
    fn config(&self) -> Result<Config> {
        let path = self.global.config.as_deref().context("this command needs --config")?;
        let mut overrides = Vec::new();
        if let Some(j) = self.global.jobs {
            overrides.push(format!("jobs={j}"));
        }
        if let Some(n) = self.global.lite_n {
            overrides.push(format!("lite_n={n}"));
        }
        if let Some(t) = self.global.timeout_secs {
            overrides.push(format!("timeout_secs={t}"));
        }
        overrides.extend(self.global.overrides.iter().cloned());
        let cfg = Config::load(path, &overrides).with_context(|| format!("loading {}", path.display()))?;
        if self.global.verbose >= 2 {
            eprintln!("# effective configuration\n{}", cfg.to_toml());
        }
        Ok(cfg)
    }

    fn project_dir(&self, cfg: &Config) -> PathBuf {
        self.global.out.join(&cfg.project)
    }

    fn trace_mode(&self, cfg: &Config) -> TraceMode {
        match &self.global.fixture_traces {
            Some(d) => TraceMode::Fixture(d.clone()),
            None => TraceMode::Shim(cfg.shim_command.clone()),
        }
    }

    fn test_ids(&self, cfg: &Config) -> Result<Vec<String>> {
        Ok(match &self.global.fixture_traces {
            Some(d) => fixture_test_ids(d)?,
            None => collect_tests(&cfg.repo, cfg)?,
        })
    }

    fn instance(&self, cfg: &Config, spec: &str) -> Result<TaskInstance> {
        let path = Path::new(spec);
        let path = match path.is_file() {
            true => path.to_path_buf(),
            false => dataset::instance_path(&self.project_dir(cfg), spec),
        };
        Ok(dataset::read_instance(&path)?)
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn collect(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    for id in ctx.test_ids(&cfg)? {
        println!("{id}");
    }
    Ok(())
}

fn trace(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let ids = ctx.test_ids(&cfg)?;
    let dir = ctx.project_dir(&cfg).join(TRACES_DIR);
    let batch = run_traces(&cfg.repo, &ids, &cfg, &ctx.trace_mode(&cfg), &dir, cfg.jobs)?;
    print_json(&serde_json::json!({
        "traces_dir": dir,
        "written": batch.written.len(),
        "passing": batch.forwarded.len(),
        "excluded": batch.excluded,
        "failures": batch.failures,
    }));
    Ok(())
}

fn schedule(ctx: &Ctx, traces: Option<PathBuf>) -> Result<()> {
    let cfg = ctx.config()?;
    let dir = traces.unwrap_or_else(|| ctx.project_dir(&cfg).join(TRACES_DIR));
    let traces = read_trace_dir(&dir)?;
    let s = schedule_traces(&cfg.repo, &traces, &cfg)?;
    let path = ctx.project_dir(&cfg).join(SCHEDULE_FILE);
    write_text(&path, &s.to_json())?;
    for step in &s.steps {
        println!(
            "step {}: tests {}, targets {}, dependents {}",
            step.step_index,
            step.ttfns.len(),
            step.new_tcfns.len(),
            step.new_dcfns.len()
        );
    }
    println!("{} steps written to {}", s.steps.len(), path.display());
    Ok(())
}

fn synthesize(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let client = client_for(&cfg)?;
    let run = run_pipeline(
        &cfg,
        &ctx.global.out,
        &ctx.trace_mode(&cfg),
        cfg.jobs,
        client.as_ref().map(|c| c as &dyn TextGenerator),
    )?;
    let r = &run.synthesis.report;
    println!(
        "{} instances from {} steps in {}",
        run.synthesis.instances.len(),
        run.synthesis.schedule.steps.len(),
        run.project_dir.display()
    );
    println!(
        "step errors {}, leakage drops {}, excluded tests {}, trace failures {}",
        r.step_errors.len(),
        r.leakage_drops.len(),
        r.excluded_tests.len(),
        r.trace_failures.len()
    );
    print!("{}", run.stats.to_json());
    Ok(())
}

fn stats(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let dir = ctx.project_dir(&cfg);
    let instances = dataset::load_instances(&dir)?;
    let stats = compute_stats(&instances, &cfg.tokenizer);
    write_text(&dir.join(STATS_FILE), &stats.to_json())?;
    print!("{}", stats.to_json());
    Ok(())
}

fn split(ctx: &Ctx, lite: bool) -> Result<()> {
    let cfg = ctx.config()?;
    let dir = ctx.project_dir(&cfg);
    let instances = dataset::load_instances(&dir)?;
    let ids = |v: &[TaskInstance]| v.iter().map(|i| i.instance_id.clone()).collect::<Vec<_>>();
    let splits = dir.join(SPLITS_DIR);
    write_text(&splits.join("full.json"), &dataset::to_json(&ids(&instances)))?;
    println!("full: {} instances", instances.len());
    if lite {
        let l = make_lite_split(&instances, cfg.lite_n);
        write_text(&splits.join("lite.json"), &dataset::to_json(&ids(&l)))?;
        println!("lite: {} instances (first {} steps)", l.len(), cfg.lite_n);
    }
    Ok(())
}

fn materialize_cmd(ctx: &Ctx, instance: &str, dest: &Path) -> Result<()> {
    let cfg = ctx.config()?;
    let inst = ctx.instance(&cfg, instance)?;
    if dest.exists() && fs::read_dir(dest)?.next().is_some() {
        bail!("{} is not empty", dest.display());
    }
    materialize_into(&inst, &cfg.repo, dest)?;
    println!("{} materialized at {}", inst.instance_id, dest.display());
    Ok(())
}

fn prompt(ctx: &Ctx, instance: &str) -> Result<()> {
    let cfg = ctx.config()?;
    let inst = ctx.instance(&cfg, instance)?;
    let partial = materialize(&inst, &cfg.repo)?;
    let p = build_prompt(&inst, &partial, ctx.global.format)?;
    println!("=== system ===\n{}\n=== user ===\n{}", p.system_text, p.user_text);
    Ok(())
}

fn apply(ctx: &Ctx, instance: &str, response: &Path, dest: Option<&Path>) -> Result<()> {
    let cfg = ctx.config()?;
    let inst = ctx.instance(&cfg, instance)?;
    let text = fs::read_to_string(response).with_context(|| format!("reading {}", response.display()))?;
    let solution = extract_solution(&text, ctx.global.format)?;
    let partial = match dest {
        Some(d) => materialize_into(&inst, &cfg.repo, d)?,
        None => materialize(&inst, &cfg.repo)?,
    };
    let edited = apply_solution(&partial, &solution)?;
    if let Some(d) = dest {
        write_changes(d, &partial, &edited)?;
    }
    print!("{}", make_patch(&partial, &edited));
    Ok(())
}

fn write_changes(root: &Path, from: &FileTree, to: &FileTree) -> Result<()> {
    let changed: FileTree = to
        .iter()
        .filter(|(p, c)| from.get(p) != Some(*c))
        .map(|(p, c)| (p.to_string(), c.to_string()))
        .collect();
    changed.write_to(root)?;
    for p in from.paths().filter(|p| !to.contains(p)) {
        fs::remove_file(root.join(p))?;
    }
    Ok(())
}

enum Source {
    Gold,
    Empty,
    Responses(PathBuf),
}

fn solution_for(inst: &TaskInstance, source: &Source, format: SolutionFormat) -> Result<Solution, String> {
    match source {
        Source::Gold => Ok(match format {
            SolutionFormat::Replace => Solution::Replace(inst.gt_replace.clone()),
            SolutionFormat::Patch => Solution::Patch(inst.gt_patch.clone()),
        }),
        Source::Empty => Ok(Solution::empty(format)),
        Source::Responses(dir) => {
            let path = dir.join(format!("{}.txt", inst.instance_id));
            let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            extract_solution(&text, format).map_err(|e| e.to_string())
        }
    }
}

fn run(
    ctx: &Ctx,
    source: Source,
    selected: &[String],
    iterations: Option<&Path>,
    cumulative: bool,
    results_path: Option<PathBuf>,
) -> Result<()> {
    let cfg = ctx.config()?;
    let dir = ctx.project_dir(&cfg);
    let all = dataset::load_instances(&dir)?;
    if let Some(missing) = selected.iter().find(|id| !all.iter().any(|i| &i.instance_id == *id)) {
        bail!("unknown instance {missing}");
    }
    let chosen: Vec<&TaskInstance> = all
        .iter()
        .filter(|i| selected.is_empty() || selected.contains(&i.instance_id))
        .collect();
    if chosen.is_empty() {
        bail!("no instances to evaluate in {}", dir.display());
    }
    let counts: BTreeMap<String, u32> = match iterations {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let format = ctx.global.format;
    let outcomes = bounded_map(&chosen, cfg.jobs, |inst| {
        let extra = match cumulative {
            true => all
                .iter()
                .filter(|o| o.project == inst.project && o.step_index < inst.step_index)
                .flat_map(|o| o.test_ids.iter().cloned())
                .collect(),
            false => Vec::new(),
        };
        let runner = RunnerConfig {
            repo: cfg.repo.clone(),
            test_command: cfg.test_command.clone(),
            timeout: Duration::from_secs(cfg.timeout_secs),
            extra_test_ids: extra,
        };
        let mut result = match solution_for(inst, &source, format) {
            Ok(sol) => tddsynth_core::evaluate_solution(inst, &sol, &runner).map_err(|e| e.to_string())?,
            Err(e) => EvalResult {
                instance_id: inst.instance_id.clone(),
                applied: false,
                apply_error: Some(e),
                tests_run: 0,
                passed: false,
                iterations: None,
                wall_time_secs: 0.0,
                output_digest: None,
                timed_out: false,
                diagnostic: None,
            },
        };
        result.iterations = counts.get(&inst.instance_id).copied();
        log::info!("{}: passed={}", result.instance_id, result.passed);
        Ok::<_, String>(result)
    });
    let results: Vec<EvalResult> = outcomes
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(anyhow::Error::msg)?;

    let tiers = match dir.join(STATS_FILE).is_file() {
        true => dataset::read_json::<DatasetStats>(&dir.join(STATS_FILE))?
            .projects
            .into_iter()
            .map(|(p, s)| (p, s.tier))
            .collect(),
        false => BTreeMap::new(),
    };
    let report = build_report(results, &tiers, cfg.max_iterations)?;
    let path = results_path.unwrap_or_else(|| dir.join("eval").join("results.json"));
    write_text(&path, &dataset::to_json(&report))?;
    print!("{}", report.render_table());
    println!("results written to {}", path.display());
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResultsFile {
    Bare(Vec<EvalResult>),
    Wrapped { results: Vec<EvalResult> },
}

fn score(results: &Path, max_iterations: u32) -> Result<()> {
    let text = fs::read_to_string(results).with_context(|| format!("reading {}", results.display()))?;
    let results = match serde_json::from_str::<ResultsFile>(&text).with_context(|| {
        format!(
            "{} is neither a result list nor an object with `results`",
            results.display()
        )
    })? {
        ResultsFile::Bare(r) | ResultsFile::Wrapped { results: r } => r,
    };
    println!("pass rate {}", pass_rate(&results)?);
    if results.iter().any(|r| r.iterations.is_some()) {
        println!("efficiency value {:.2}", efficiency_value(&results, max_iterations)?);
    }
    let report: EvalReport = build_report(results, &BTreeMap::new(), max_iterations)?;
    if report.summary.len() > 2 {
        print!("{}", report.render_table());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Ctx { global: cli.global };
    match cli.command {
        Command::CollectTests => collect(&ctx),
        Command::Trace => trace(&ctx),
        Command::Schedule { traces } => schedule(&ctx, traces),
        Command::Synthesize => synthesize(&ctx),
        Command::Stats => stats(&ctx),
        Command::Split { lite } => split(&ctx, lite),
        Command::Materialize { instance, dest } => materialize_cmd(&ctx, &instance, &dest),
        Command::Eval(EvalCommand::Prompt { instance }) => prompt(&ctx, &instance),
        Command::Eval(EvalCommand::Apply {
            instance,
            response,
            dest,
        }) => apply(&ctx, &instance, &response, dest.as_deref()),
        Command::Eval(EvalCommand::Run {
            gold,
            empty,
            responses,
            instances,
            iterations,
            cumulative,
            results,
        }) => {
            let source = match (gold, empty, responses) {
                (true, _, _) => Source::Gold,
                (_, true, _) => Source::Empty,
                (_, _, Some(d)) => Source::Responses(d),
                _ => bail!("choose one of --gold, --empty or --responses"),
            };
            run(&ctx, source, &instances, iterations.as_deref(), cumulative, results)
        }
        Command::Eval(EvalCommand::Score {
            results,
            max_iterations,
        }) => score(&results, max_iterations),
    }
}

fn main() -> ExitCode {
    // Default SIGPIPE disposition: a closed stdout ends the process silently.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!(
                "{}",
                serde_json::json!({ "error": causes.join(": "), "causes": causes })
            );
            ExitCode::from(1)
        }
    }
}
