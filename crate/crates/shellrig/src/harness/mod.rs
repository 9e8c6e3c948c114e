//! Benchmark harness: suites of validated tasks, executed under a chosen
//! agent configuration against freshly seeded platforms, scored by
//! declarative checks, and aggregated into reports.
//!
//! A suite lives in a directory:
//!
//! ```text
//! suites/demo/
//! ├── suite.json            task ids, goals, and checks
//! ├── fixture.json          platform seed (path named by suite.json)
//! ├── scripts/<task>.json   recorded turns, one file per task (scripted runs)
//! └── docs/                 copied into workspaces when the docs feature is on
//! ```
//!
//! Each run gets its own output directory (see [`store::RunPaths`] for the
//! layout). Every worker owns a private platform instance listening on an
//! ephemeral port, and every task starts from the same fixture snapshot, so
//! results do not depend on worker count or interleaving.

pub mod outcome;
pub mod report;
pub mod stats;
pub mod store;
pub mod validate;

pub use outcome::{classify_outcome, OutcomeCategory, ALL_CATEGORIES};
pub use report::{arm_label, emit_report, strip_volatile};
pub use stats::{
    error_breakdown, mean, oracle_union, success_rate_se, tool_call_histogram, ErrorBreakdown,
    Histogram, StatsError, UnionSummary,
};
pub use store::{
    append_jsonl, read_manifest, read_traces, write_manifest, write_traces, RunManifest, RunPaths,
};
pub use validate::{answer_matches, evaluate_check, normalize_answer, ValidatorCheck};

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::agent::{
    run_planner_executor, run_single_agent, AgentConfig, AgentError, EpisodeSetup, Feature,
    Orchestration, TerminationReason, Trace,
};
use crate::platform::{
    shared, Fixture, FixtureError, PlatformError, PlatformHandle, PlatformServer, PlatformState,
    Profile, Snapshot,
};
use crate::provider::{
    compute_cost, make_scripted, Cost, LiveProvider, PricingTable, Provider, ProviderError,
    TokenUsage, TurnScript,
};
use crate::skills::{SkillsError, SkillsStore};

/// Errors from loading or running a benchmark suite.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// The suite file or one of its companion files is malformed.
    #[error("invalid suite: {0}")]
    Suite(String),
    /// A check already passes on a freshly seeded platform, so the task
    /// could never tell a working agent from an idle one.
    #[error("invalid task {task_id}: check #{index} already passes on a fresh platform")]
    InvalidTask { task_id: String, index: usize },
    /// A check could not be evaluated — an authoring error in the suite.
    #[error("check failed to evaluate for task {task_id}")]
    Check {
        task_id: String,
        #[source]
        source: PlatformError,
    },
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Skills(#[from] SkillsError),
    #[error("harness io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which provider backs the model side of each episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderSpec {
    /// Replay recorded turns from `scripts/<task-id>.json` beside the suite.
    Scripted,
    /// A live chat-completions endpoint configured through the environment.
    Live,
}

/// One benchmark task: a goal handed to the agent verbatim, and the checks
/// that decide success. All checks must pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub goal: String,
    pub checks: Vec<ValidatorCheck>,
}

/// A task suite as stored on disk (`suite.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    /// Fixture path, relative to the suite file.
    pub fixture: String,
    pub tasks: Vec<TaskInstance>,
}

/// A suite plus everything resolved from the disk around it.
#[derive(Debug, Clone)]
pub struct LoadedSuite {
    pub suite: Suite,
    pub fixture: Fixture,
    pub profile: Profile,
    /// Directory containing the suite file; `scripts/` and `docs/` live here.
    pub dir: PathBuf,
}

/// Load and validate a suite file.
///
/// These are authoring checks: task ids must be unique, non-empty, and safe
/// to use as directory names; every task needs at least one check; the
/// fixture must parse and name a known platform profile.
pub fn load_suite(path: &Path) -> Result<LoadedSuite, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|err| HarnessError::Suite(format!("cannot read {}: {err}", path.display())))?;
    let suite: Suite = serde_json::from_str(&text)
        .map_err(|err| HarnessError::Suite(format!("{}: {err}", path.display())))?;
    if suite.tasks.is_empty() {
        return Err(HarnessError::Suite(format!(
            "{}: suite has no tasks",
            path.display()
        )));
    }
    let mut seen = BTreeSet::new();
    for task in &suite.tasks {
        let safe_id = !task.id.is_empty()
            && task.id != "."
            && task.id != ".."
            && task
                .id
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
        if !safe_id {
            return Err(HarnessError::Suite(format!(
                "task id {:?} is not a safe directory name",
                task.id
            )));
        }
        if !seen.insert(task.id.as_str()) {
            return Err(HarnessError::Suite(format!(
                "duplicate task id {:?}",
                task.id
            )));
        }
        if task.checks.is_empty() {
            return Err(HarnessError::Suite(format!(
                "task {:?} has no checks",
                task.id
            )));
        }
    }
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let fixture = Fixture::from_file(&dir.join(&suite.fixture))?;
    let profile = Profile::from_name(&fixture.profile).ok_or_else(|| {
        HarnessError::Suite(format!(
            "fixture names unknown profile {:?}",
            fixture.profile
        ))
    })?;
    Ok(LoadedSuite {
        suite,
        fixture,
        profile,
        dir,
    })
}

/// One evaluated check and its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: ValidatorCheck,
    pub passed: bool,
}

/// Scoring summary for a single task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub success: bool,
    pub checks: Vec<CheckReport>,
    pub tool_call_count: usize,
    pub total_usage: TokenUsage,
    #[serde(default = "Cost::zero")]
    pub total_cost: Cost,
    /// Seconds; volatile across runs.
    pub wall_clock: f64,
    pub termination: TerminationReason,
    #[serde(default)]
    pub fallback: bool,
}

/// Everything one task produced: the score and the full trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRun {
    pub report: TaskReport,
    pub trace: Trace,
}

/// Run one task against an already running platform.
///
/// The platform is reset to `snapshot` first. Then every check is evaluated
/// against the fresh state and an empty final message, where it must fail —
/// a task whose check passes before the agent acts is rejected as
/// [`HarnessError::InvalidTask`]. Only then does the episode run, after
/// which the same checks decide success.
///
/// Token cost is priced against `pricing`; models missing from the table
/// cost zero.
pub fn run_task(
    task: &TaskInstance,
    config: &AgentConfig,
    setup: &EpisodeSetup,
    snapshot: &Snapshot,
    provider: &dyn Provider,
    pricing: &PricingTable,
) -> Result<TaskRun, HarnessError> {
    setup
        .platform
        .lock()
        .expect("platform lock poisoned")
        .reset(snapshot);
    {
        let state = setup.platform.lock().expect("platform lock poisoned");
        for (index, check) in task.checks.iter().enumerate() {
            let passed =
                evaluate_check(check, &state, "").map_err(|source| HarnessError::Check {
                    task_id: task.id.clone(),
                    source,
                })?;
            if passed {
                return Err(HarnessError::InvalidTask {
                    task_id: task.id.clone(),
                    index,
                });
            }
        }
    }

    let mut trace = match config.orchestration {
        Orchestration::Single => run_single_agent(&task.goal, config, setup, provider)?,
        Orchestration::PlannerExecutor => {
            run_planner_executor(&task.goal, config, setup, provider)?
        }
    };
    trace.task_id = task.id.clone();
    if pricing.get(&config.model).is_some() {
        trace.total_cost = compute_cost(trace.total_usage, &config.model, pricing)
            .map_err(|err| HarnessError::Suite(format!("pricing: {err}")))?;
    }

    let state = setup.platform.lock().expect("platform lock poisoned");
    let mut checks = Vec::with_capacity(task.checks.len());
    for check in &task.checks {
        let passed = evaluate_check(check, &state, &trace.final_message).map_err(|source| {
            HarnessError::Check {
                task_id: task.id.clone(),
                source,
            }
        })?;
        checks.push(CheckReport {
            check: check.clone(),
            passed,
        });
    }
    drop(state);

    let success = checks.iter().all(|check| check.passed);
    let report = TaskReport {
        task_id: task.id.clone(),
        success,
        checks,
        tool_call_count: trace.tool_call_count,
        total_usage: trace.total_usage,
        total_cost: trace.total_cost.clone(),
        wall_clock: trace.wall_clock,
        termination: trace.termination,
        fallback: trace.fallback,
    };
    Ok(TaskRun { report, trace })
}

/// Options for a full suite run.
#[derive(Debug)]
pub struct RunOptions {
    pub agent: AgentConfig,
    pub provider: ProviderSpec,
    /// Run directory; created if missing.
    pub out_dir: PathBuf,
    /// Worker count. Skills runs require 1, because later tasks must see
    /// the skills earlier tasks wrote.
    pub jobs: usize,
    pub pricing: PricingTable,
}

impl RunOptions {
    /// Scripted single-worker run with an empty pricing table.
    pub fn new(agent: AgentConfig, out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            agent,
            provider: ProviderSpec::Scripted,
            out_dir: out_dir.into(),
            jobs: 1,
            pricing: PricingTable::new(),
        }
    }
}

/// Aggregate results for one arm — a suite run under one agent configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub suite: String,
    /// Human-readable arm label, e.g. `terminal+skills/single`.
    pub arm: String,
    pub agent: AgentConfig,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Standard error of the success rate, as a fraction.
    pub se: f64,
    pub mean_tool_calls: f64,
    #[serde(default = "Cost::zero")]
    pub mean_cost: Cost,
    /// Seconds; volatile across runs.
    pub mean_wall_clock: f64,
    pub histogram: Histogram,
    pub breakdown: ErrorBreakdown,
    pub tasks: Vec<TaskReport>,
}

/// Aggregate per-task reports (and their traces, for per-call outcomes)
/// into one arm summary.
pub fn summarize(
    suite: &str,
    agent: &AgentConfig,
    tasks: Vec<TaskReport>,
    traces: &[Trace],
) -> RunSummary {
    let trials = tasks.len();
    let successes = tasks.iter().filter(|task| task.success).count();
    let (success_rate, se) = success_rate_se(successes, trials);
    let hist_input: Vec<(usize, bool)> = tasks
        .iter()
        .map(|task| (task.tool_call_count, task.success))
        .collect();
    let histogram = tool_call_histogram(&hist_input, agent.max_tool_calls);
    let mut calls = Vec::new();
    for (task, trace) in tasks.iter().zip(traces) {
        for step in &trace.steps {
            for record in &step.tool_results {
                calls.push((record.outcome, task.success));
            }
        }
    }
    let breakdown = error_breakdown(&calls);
    let tool_counts: Vec<f64> = tasks
        .iter()
        .map(|task| task.tool_call_count as f64)
        .collect();
    let costs: Vec<Cost> = tasks.iter().map(|task| task.total_cost.clone()).collect();
    let walls: Vec<f64> = tasks.iter().map(|task| task.wall_clock).collect();
    RunSummary {
        suite: suite.to_string(),
        arm: arm_label(agent),
        agent: agent.clone(),
        trials,
        successes,
        success_rate,
        se,
        mean_tool_calls: mean(&tool_counts),
        mean_cost: Cost::mean_of(&costs),
        mean_wall_clock: mean(&walls),
        histogram,
        breakdown,
        tasks,
    }
}

/// Per-task verdicts of the two check families, in task order: state checks
/// (left) and answer/url checks (right). A family certifies a task only if
/// the task has at least one check of that family and all of them pass.
pub fn oracle_vectors(reports: &[TaskReport]) -> (Vec<bool>, Vec<bool>) {
    reports
        .iter()
        .map(|report| {
            let family_passes = |state: bool| {
                let mut any = false;
                for check in &report.checks {
                    if check.check.is_state_check() == state {
                        any = true;
                        if !check.passed {
                            return false;
                        }
                    }
                }
                any
            };
            (family_passes(true), family_passes(false))
        })
        .unzip()
}

/// Run every task in the suite at `suite_path`, writing the manifest,
/// traces, and reports under `options.out_dir`.
///
/// Each worker gets a private, freshly seeded platform on an ephemeral port,
/// and each task starts from the same snapshot, so the outcome is
/// independent of `jobs`. Traces land in `traces.jsonl` in suite order
/// regardless of completion order.
pub fn run_suite(suite_path: &Path, options: &RunOptions) -> Result<RunSummary, HarnessError> {
    let loaded = load_suite(suite_path)?;
    let paths = RunPaths::new(&options.out_dir);
    fs::create_dir_all(paths.root())?;

    let skills_enabled = options.agent.features.contains(&Feature::Skills);
    let docs_enabled = options.agent.features.contains(&Feature::Docs);
    if skills_enabled && options.jobs > 1 {
        return Err(HarnessError::Suite(
            "skills accumulate across tasks, so skills runs require jobs = 1".into(),
        ));
    }
    if skills_enabled {
        fs::create_dir_all(paths.skills_root())?;
    }
    let docs_src = loaded.dir.join("docs");
    if docs_enabled && !docs_src.is_dir() {
        return Err(HarnessError::Suite(format!(
            "docs feature requested but {} is missing",
            docs_src.display()
        )));
    }

    let jobs = options.jobs.clamp(1, loaded.suite.tasks.len());
    let live: Option<Arc<LiveProvider>> = match options.provider {
        ProviderSpec::Live => Some(Arc::new(LiveProvider::from_env()?)),
        ProviderSpec::Scripted => None,
    };

    let mut manifest = RunManifest {
        suite: loaded.suite.name.clone(),
        suite_path: suite_path.display().to_string(),
        fixture: loaded.fixture.name.clone(),
        agent: options.agent.clone(),
        provider: options.provider,
        jobs,
        task_count: loaded.suite.tasks.len(),
        started_at: store::unix_now(),
        finished_at: 0.0,
    };
    write_manifest(&paths, &manifest)?;

    // One platform per worker: seeded once, snapshotted, reset before each task.
    struct Station {
        snapshot: Snapshot,
        server: PlatformServer,
        handle: PlatformHandle,
    }
    let mut stations = Vec::with_capacity(jobs);
    for _ in 0..jobs {
        let state = PlatformState::seed(&loaded.fixture);
        let snapshot = state.snapshot();
        let handle = shared(state);
        let server = PlatformServer::start(handle.clone(), 0)?;
        stations.push(Station {
            snapshot,
            server,
            handle,
        });
    }

    let run_one = |task: &TaskInstance, station: &Station| -> Result<TaskRun, HarnessError> {
        let workdir = paths.workdir(&task.id);
        fs::create_dir_all(&workdir)?;
        if docs_enabled {
            copy_tree(&docs_src, &workdir.join("docs"))?;
        }
        if skills_enabled {
            link_skills(&workdir, &paths.skills_root())?;
        }
        let setup = EpisodeSetup::new(
            loaded.profile,
            station.server.base_url(),
            &workdir,
            station.handle.clone(),
        );
        let run = match options.provider {
            ProviderSpec::Scripted => {
                let script_path = loaded.dir.join("scripts").join(format!("{}.json", task.id));
                let text = fs::read_to_string(&script_path).map_err(|err| {
                    HarnessError::Suite(format!(
                        "no script for task {:?} ({}): {err}",
                        task.id,
                        script_path.display()
                    ))
                })?;
                let script = TurnScript::from_json(&text).map_err(|err| {
                    HarnessError::Suite(format!(
                        "bad script {}: {err}",
                        script_path.display()
                    ))
                })?;
                let provider = make_scripted(script);
                run_task(
                    task,
                    &options.agent,
                    &setup,
                    &station.snapshot,
                    &provider,
                    &options.pricing,
                )?
            }
            ProviderSpec::Live => {
                let provider = live.clone().expect("live provider was constructed above");
                run_task(
                    task,
                    &options.agent,
                    &setup,
                    &station.snapshot,
                    &provider,
                    &options.pricing,
                )?
            }
        };
        if skills_enabled {
            let skills_store = SkillsStore::open(paths.skills_root())?;
            let mut entries = Vec::new();
            for rel in skills_store.files() {
                // Agent-written files that don't parse as skills still count
                // in the stats but are omitted from the inventory.
                if let Ok(skill) = skills_store.load(&rel) {
                    entries.push(serde_json::json!({
                        "path": skill.path,
                        "title": skill.title,
                        "status": skill.status,
                    }));
                }
            }
            append_jsonl(
                &paths.skills_events(),
                &serde_json::json!({
                    "task_id": task.id,
                    "stats": skills_store.stats(),
                    "skills": entries,
                }),
            )?;
        }
        Ok(run)
    };

    let tasks = &loaded.suite.tasks;
    let results: Vec<Mutex<Option<Result<TaskRun, HarnessError>>>> =
        tasks.iter().map(|_| Mutex::new(None)).collect();
    if jobs == 1 {
        for (index, task) in tasks.iter().enumerate() {
            let outcome = run_one(task, &stations[0]);
            let failed = outcome.is_err();
            *results[index].lock().expect("result slot poisoned") = Some(outcome);
            if failed {
                break;
            }
        }
    } else {
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for station in &stations {
                scope.spawn(|| loop {
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    if index >= tasks.len() {
                        break;
                    }
                    let outcome = run_one(&tasks[index], station);
                    let failed = outcome.is_err();
                    *results[index].lock().expect("result slot poisoned") = Some(outcome);
                    if failed {
                        // Poison the queue so idle workers stop picking up work.
                        next.fetch_max(tasks.len(), Ordering::SeqCst);
                        break;
                    }
                });
            }
        });
    }

    let slots: Vec<Option<Result<TaskRun, HarnessError>>> = results
        .into_iter()
        .map(|slot| slot.into_inner().expect("result slot poisoned"))
        .collect();
    let mut runs = Vec::with_capacity(slots.len());
    let mut first_error = None;
    let mut incomplete = false;
    for slot in slots {
        match slot {
            Some(Ok(run)) => runs.push(run),
            Some(Err(err)) => {
                first_error.get_or_insert(err);
            }
            None => incomplete = true,
        }
    }
    if let Some(err) = first_error {
        return Err(err);
    }
    if incomplete {
        return Err(HarnessError::Suite(
            "run aborted before all tasks completed".into(),
        ));
    }

    let mut traces = Vec::with_capacity(runs.len());
    let mut reports = Vec::with_capacity(runs.len());
    for run in runs {
        traces.push(run.trace);
        reports.push(run.report);
    }
    write_traces(&paths.traces(), &traces)?;

    let summary = summarize(&loaded.suite.name, &options.agent, reports, &traces);
    fs::write(paths.report_md(), emit_report(std::slice::from_ref(&summary)))?;
    let mut json = serde_json::to_string_pretty(&summary)
        .map_err(|err| HarnessError::Suite(format!("report serialization: {err}")))?;
    json.push('\n');
    fs::write(paths.report_json(), json)?;

    manifest.finished_at = store::unix_now();
    write_manifest(&paths, &manifest)?;
    Ok(summary)
}

/// Recursively copy a directory tree.
fn copy_tree(src: &Path, dst: &Path) -> std::io::Result<()> {
    for entry in walkdir::WalkDir::new(src).sort_by_file_name() {
        let entry = entry.map_err(|err| std::io::Error::new(std::io::ErrorKind::Other, err))?;
        let rel = entry.path().strip_prefix(src).expect("walked under src");
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target)?;
        } else if entry.file_type().is_file() {
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

/// Expose the run-wide skills root inside a task workspace as `skills/`.
fn link_skills(workdir: &Path, skills_root: &Path) -> std::io::Result<()> {
    let link = workdir.join("skills");
    if fs::symlink_metadata(&link).is_ok() {
        return Ok(());
    }
    #[cfg(unix)]
    {
        std::os::unix::fs::symlink(skills_root.canonicalize()?, &link)
    }
    #[cfg(not(unix))]
    {
        Err(std::io::Error::new(
            std::io::ErrorKind::Unsupported,
            "skills runs need symlink support",
        ))
    }
}
