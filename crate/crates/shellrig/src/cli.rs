//! Operator entry point: serve the platform, run suites, inspect traces,
//! emit figure-style aggregates.
//!
//! Exit code 0 means the requested operation completed — a benchmark run
//! with failing tasks still exits 0, because task failures are results, not
//! errors. Anything that prevented the operation (bad suite, unreachable
//! files, provider misconfiguration) exits 1.

use std::collections::BTreeSet;
use std::error::Error;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::agent::{AgentConfig, Feature, Orchestration, Paradigm, Trace};
use crate::harness::{
    emit_report, oracle_union, oracle_vectors, read_traces, run_suite, ProviderSpec, RunOptions,
    RunPaths, RunSummary,
};
use crate::platform::{shared, Fixture, PlatformServer, PlatformState, Profile};
use crate::provider::PricingTable;

#[derive(Parser)]
#[command(
    name = "shellrig",
    about = "Terminal-agent benchmark rig: mock enterprise platform, episode runner, and report tooling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve a fixture as a mock enterprise platform over HTTP.
    Platform {
        #[command(subcommand)]
        command: PlatformCommand,
    },
    /// Run benchmark suites.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Print one task's trace from a finished run.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
    /// Aggregate finished runs into tables.
    Analyze {
        /// What to aggregate.
        what: AnalyzeWhat,
        /// Run directories (each containing report.json).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PlatformCommand {
    /// Seed a platform from a fixture and serve it until interrupted.
    Serve {
        /// Fixture file to seed from.
        #[arg(long)]
        fixture: PathBuf,
        /// TCP port; 0 picks an ephemeral one.
        #[arg(long, default_value_t = 0)]
        port: u16,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run every task in a suite and write reports.
    Run {
        /// Suite file (suite.json).
        #[arg(long)]
        suite: PathBuf,
        /// Agent paradigm.
        #[arg(long, value_enum, default_value_t = ParadigmArg::Terminal)]
        agent: ParadigmArg,
        /// Episode composition.
        #[arg(long, value_enum, default_value_t = OrchestrationArg::Single)]
        orchestration: OrchestrationArg,
        /// Model provider.
        #[arg(long, value_enum, default_value_t = ProviderArg::Scripted)]
        provider: ProviderArg,
        /// Prompt-level features; repeat for more than one.
        #[arg(long = "feature", value_enum)]
        features: Vec<FeatureArg>,
        /// Model name sent to the provider and priced in reports.
        #[arg(long, default_value = "scripted")]
        model: String,
        /// Tool-call budget per task.
        #[arg(long, default_value_t = crate::agent::DEFAULT_MAX_TOOL_CALLS)]
        max_tool_calls: usize,
        /// Parallel workers, each with a private platform.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Pricing table (JSON); omitted models cost zero.
        #[arg(long)]
        pricing: Option<PathBuf>,
        /// Run directory; defaults to runs/<suite>-<arm>-<seconds>.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Pretty-print one task's recorded turns and observations.
    Show {
        /// Run directory (containing traces.jsonl).
        run: PathBuf,
        /// Task id to show.
        task_id: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ParadigmArg {
    Terminal,
    ToolRegistry,
    Hybrid,
    WebAdapter,
}

impl From<ParadigmArg> for Paradigm {
    fn from(arg: ParadigmArg) -> Paradigm {
        match arg {
            ParadigmArg::Terminal => Paradigm::Terminal,
            ParadigmArg::ToolRegistry => Paradigm::ToolRegistry,
            ParadigmArg::Hybrid => Paradigm::Hybrid,
            ParadigmArg::WebAdapter => Paradigm::WebAdapter,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OrchestrationArg {
    Single,
    PlannerExecutor,
}

impl From<OrchestrationArg> for Orchestration {
    fn from(arg: OrchestrationArg) -> Orchestration {
        match arg {
            OrchestrationArg::Single => Orchestration::Single,
            OrchestrationArg::PlannerExecutor => Orchestration::PlannerExecutor,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ProviderArg {
    Scripted,
    Live,
}

impl From<ProviderArg> for ProviderSpec {
    fn from(arg: ProviderArg) -> ProviderSpec {
        match arg {
            ProviderArg::Scripted => ProviderSpec::Scripted,
            ProviderArg::Live => ProviderSpec::Live,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FeatureArg {
    Docs,
    Skills,
}

impl From<FeatureArg> for Feature {
    fn from(arg: FeatureArg) -> Feature {
        match arg {
            FeatureArg::Docs => Feature::Docs,
            FeatureArg::Skills => Feature::Skills,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeWhat {
    /// Combined arms table across the given runs.
    Report,
    /// Tool-call count distribution.
    Histogram,
    /// Outcome breakdown by task cohort.
    Errors,
    /// Skills inventory growth over a run.
    SkillsGrowth,
    /// Agreement between state checks and answer checks.
    Oracle,
}

/// Run the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("shellrig: {err}");
            let mut source = err.source();
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            1
        }
    }
}

type CliResult = Result<(), Box<dyn Error>>;

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Platform {
            command: PlatformCommand::Serve { fixture, port },
        } => serve_platform(&fixture, port),
        Command::Bench {
            command:
                BenchCommand::Run {
                    suite,
                    agent,
                    orchestration,
                    provider,
                    features,
                    model,
                    max_tool_calls,
                    jobs,
                    pricing,
                    out_dir,
                },
        } => bench_run(
            &suite,
            agent,
            orchestration,
            provider,
            &features,
            model,
            max_tool_calls,
            jobs,
            pricing.as_deref(),
            out_dir,
        ),
        Command::Trace {
            command: TraceCommand::Show { run, task_id },
        } => trace_show(&run, &task_id),
        Command::Analyze { what, runs } => analyze(what, &runs),
    }
}

fn serve_platform(fixture_path: &Path, port: u16) -> CliResult {
    let fixture = Fixture::from_file(fixture_path)?;
    let profile = Profile::from_name(&fixture.profile)
        .ok_or_else(|| format!("fixture names unknown profile {:?}", fixture.profile))?;
    let state = PlatformState::seed(&fixture);
    let tables = fixture.tables.len();
    let records: usize = fixture.tables.values().map(|t| t.records.len()).sum();
    let server = PlatformServer::start(shared(state), port)?;
    let base_url = server.base_url();
    println!(
        "serving fixture {:?} ({tables} tables, {records} records) as profile {}",
        fixture.name,
        profile.name()
    );
    println!("listening on {base_url}");
    println!();
    for (key, value) in profile.env_for(&base_url) {
        println!("export {key}='{value}'");
    }
    println!();
    println!("press Ctrl-C to stop");
    loop {
        std::thread::park();
    }
}

#[allow(clippy::too_many_arguments)]
fn bench_run(
    suite: &Path,
    agent: ParadigmArg,
    orchestration: OrchestrationArg,
    provider: ProviderArg,
    features: &[FeatureArg],
    model: String,
    max_tool_calls: usize,
    jobs: usize,
    pricing: Option<&Path>,
    out_dir: Option<PathBuf>,
) -> CliResult {
    let config = AgentConfig {
        paradigm: agent.into(),
        features: features
            .iter()
            .map(|&f| Feature::from(f))
            .collect::<BTreeSet<_>>(),
        orchestration: orchestration.into(),
        max_tool_calls,
        model,
    };
    let out_dir = out_dir.unwrap_or_else(|| {
        let seconds = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let suite_stem = suite
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "suite".to_string());
        let arm = crate::harness::arm_label(&config).replace('/', "-");
        PathBuf::from("runs").join(format!("{suite_stem}-{arm}-{seconds}"))
    });
    let options = RunOptions {
        agent: config,
        provider: provider.into(),
        out_dir,
        jobs,
        pricing: match pricing {
            Some(path) => PricingTable::from_file(path)?,
            None => PricingTable::new(),
        },
    };
    let summary = run_suite(suite, &options)?;
    print!("{}", emit_report(std::slice::from_ref(&summary)));
    println!(
        "{}/{} tasks succeeded; artifacts in {}",
        summary.successes,
        summary.trials,
        options.out_dir.display()
    );
    Ok(())
}

fn clip(text: &str, limit: usize) -> String {
    if text.len() <= limit {
        return text.to_string();
    }
    let mut end = limit;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}… ({} bytes total)", &text[..end], text.len())
}

fn trace_show(run: &Path, task_id: &str) -> CliResult {
    let paths = RunPaths::new(run);
    let traces = read_traces(&paths.traces())?;
    let trace: &Trace = traces
        .iter()
        .find(|t| t.task_id == task_id)
        .ok_or_else(|| format!("no trace for task {task_id:?} in {}", run.display()))?;
    println!("task: {}", trace.task_id);
    println!(
        "termination: {}{}",
        trace.termination.name(),
        if trace.fallback { " (fallback)" } else { "" }
    );
    println!(
        "tool calls: {}; usage: {} in / {} out; cost: {}",
        trace.tool_call_count,
        trace.total_usage.input_tokens,
        trace.total_usage.output_tokens,
        trace.total_cost.rounded_2dp()
    );
    for (turn, step) in trace.steps.iter().enumerate() {
        let phase = step
            .phase
            .as_ref()
            .map(|p| format!(" [{p}]"))
            .unwrap_or_default();
        println!("\nturn {}{phase}:", turn + 1);
        if let Some(text) = &step.model_turn.text {
            if !text.is_empty() {
                println!("  model: {}", clip(text, 400));
            }
        }
        for record in &step.tool_results {
            let invocation = &record.invocation;
            let detail = invocation
                .arguments
                .get("command")
                .and_then(|v| v.as_str())
                .map(|cmd| format!(": {}", clip(cmd, 200)))
                .unwrap_or_else(|| {
                    format!(
                        " {}",
                        serde_json::Value::Object(invocation.arguments.clone())
                    )
                });
            println!("  -> {}{detail}", invocation.tool_name);
            println!(
                "  <- [{}] {}",
                record.outcome.label(),
                clip(&record.observation, 400)
            );
        }
    }
    println!("\nfinal: {}", clip(&trace.final_message, 2000));
    Ok(())
}

fn load_summary(run: &Path) -> Result<RunSummary, Box<dyn Error>> {
    let path = RunPaths::new(run).report_json();
    let text = std::fs::read_to_string(&path)
        .map_err(|err| format!("cannot read {}: {err}", path.display()))?;
    Ok(serde_json::from_str(&text)
        .map_err(|err| format!("malformed report {}: {err}", path.display()))?)
}

fn analyze(what: AnalyzeWhat, runs: &[PathBuf]) -> CliResult {
    match what {
        AnalyzeWhat::Report => {
            let summaries: Vec<RunSummary> = runs
                .iter()
                .map(|run| load_summary(run))
                .collect::<Result<_, _>>()?;
            print!("{}", emit_report(&summaries));
        }
        AnalyzeWhat::Histogram => {
            for run in runs {
                let summary = load_summary(run)?;
                let hist = &summary.histogram;
                println!("## Tool calls per task — {} ({})", summary.arm, summary.suite);
                println!("| Calls | Successes | Failures |");
                println!("|---|---|---|");
                for bin in 0..=hist.cap {
                    if hist.successes[bin] == 0 && hist.failures[bin] == 0 {
                        continue;
                    }
                    let label = if bin == hist.cap {
                        format!("{bin}+")
                    } else {
                        bin.to_string()
                    };
                    println!("| {label} | {} | {} |", hist.successes[bin], hist.failures[bin]);
                }
                println!();
            }
        }
        AnalyzeWhat::Errors => {
            for run in runs {
                let summary = load_summary(run)?;
                println!("## Tool-call outcomes — {} ({})", summary.arm, summary.suite);
                println!("| Outcome | Successful tasks | Failed tasks |");
                println!("|---|---|---|");
                for category in crate::harness::ALL_CATEGORIES {
                    let s = summary.breakdown.success.get(&category).copied().unwrap_or(0.0);
                    let f = summary.breakdown.failure.get(&category).copied().unwrap_or(0.0);
                    println!(
                        "| {} | {:.2}% | {:.2}% |",
                        category.label(),
                        s * 100.0,
                        f * 100.0
                    );
                }
                println!();
            }
        }
        AnalyzeWhat::SkillsGrowth => {
            for run in runs {
                let path = RunPaths::new(run).skills_events();
                let text = std::fs::read_to_string(&path)
                    .map_err(|err| format!("cannot read {}: {err}", path.display()))?;
                println!("## Skills growth — {}", run.display());
                println!("| After task | Files | KB | Statuses |");
                println!("|---|---|---|---|");
                for (number, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let event: serde_json::Value = serde_json::from_str(line)
                        .map_err(|err| format!("{}: line {}: {err}", path.display(), number + 1))?;
                    let mut statuses = String::new();
                    if let Some(skills) = event["skills"].as_array() {
                        for skill in skills {
                            if !statuses.is_empty() {
                                statuses.push_str(", ");
                            }
                            let _ = write!(
                                statuses,
                                "{}={}",
                                skill["path"].as_str().unwrap_or("?"),
                                skill["status"].as_str().unwrap_or("?")
                            );
                        }
                    }
                    println!(
                        "| {} | {} | {} | {} |",
                        event["task_id"].as_str().unwrap_or("?"),
                        event["stats"]["file_count"],
                        event["stats"]["total_kilobytes"],
                        statuses
                    );
                }
                println!();
            }
        }
        AnalyzeWhat::Oracle => {
            let mut state = Vec::new();
            let mut answer = Vec::new();
            for run in runs {
                let summary = load_summary(run)?;
                let (s, a) = oracle_vectors(&summary.tasks);
                state.extend(s);
                answer.extend(a);
            }
            let union = oracle_union(&state, &answer)?;
            println!("trials: {}", union.trials);
            println!("state-check rate:  {:.2}%", union.rate_a * 100.0);
            println!("answer-check rate: {:.2}%", union.rate_b * 100.0);
            println!("union rate:        {:.2}%", union.rate_union * 100.0);
            println!(
                "both: {}; state only: {}; answer only: {}; neither: {}",
                union.both, union.only_a, union.only_b, union.neither
            );
        }
    }
    Ok(())
}
