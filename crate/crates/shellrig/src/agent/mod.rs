//! The episode engine: agent configuration, toolsets, and the tool-call loop.
//!
//! An episode is a conversation between one model (behind a
//! [`Provider`](crate::provider::Provider)) and a set of [`Toolset`]s,
//! bounded by a tool-call budget. The engine owns message-pairing ids,
//! per-call outcome classification, usage and share accounting, and the
//! termination contract. Orchestrations compose episodes out of phases:
//! [`run_single_agent`] runs one, [`run_planner_executor`] chains a
//! read-only planning phase into an execution phase.

pub mod orchestrate;
pub mod plan;
pub mod prompts;
pub mod registry;

pub use orchestrate::run_planner_executor;
pub use plan::{extract_plan, Plan, PlanError};
pub use prompts::{assemble_role_prompt, assemble_system_prompt, PromptRole, PLAN_HEADING};
pub use registry::{register_tool, RegistryToolset, ToolRegistry};

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::harness::outcome::{classify_outcome, OutcomeCategory};
use crate::platform::{PlatformHandle, Profile};
use crate::provider::{
    ChatMessage, Cost, ModelTurn, Provider, TokenUsage, ToolInvocation, ToolParam, ToolSchema,
    ToolsetShares,
};
use crate::sandbox::{
    render_observation, ExecLimits, ExecResult, PolicyDecision, Sandbox, SandboxError,
    SandboxPolicy,
};

/// Default per-episode tool-call budget.
pub const DEFAULT_MAX_TOOL_CALLS: usize = 50;

/// Share-map key for calls to tool names no toolset provides.
pub const UNKNOWN_TOOLSET: &str = "unknown";

/// How the agent reaches the platform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    /// One `terminal` tool; everything goes through the shell.
    #[default]
    Terminal,
    /// The curated named-tool registry, no shell.
    ToolRegistry,
    /// Both toolsets side by side.
    Hybrid,
    /// Browser automation; recognized in configs but not runnable here.
    WebAdapter,
}

impl Paradigm {
    pub fn name(&self) -> &'static str {
        match self {
            Paradigm::Terminal => "terminal",
            Paradigm::ToolRegistry => "tool_registry",
            Paradigm::Hybrid => "hybrid",
            Paradigm::WebAdapter => "web_adapter",
        }
    }
}

/// Optional prompt-level capabilities layered onto a paradigm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// Point the agent at the workspace `docs/` directory.
    Docs,
    /// Persistent skills directory: search before acting, write after.
    Skills,
}

impl Feature {
    /// Stable lowercase name, as used in arm labels and the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Feature::Docs => "docs",
            Feature::Skills => "skills",
        }
    }
}

/// How episodes are composed for one task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orchestration {
    #[default]
    Single,
    PlannerExecutor,
}

impl Orchestration {
    /// Stable lowercase name, as used in arm labels and the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Orchestration::Single => "single",
            Orchestration::PlannerExecutor => "planner_executor",
        }
    }
}

fn default_max_tool_calls() -> usize {
    DEFAULT_MAX_TOOL_CALLS
}

fn default_model() -> String {
    "scripted".to_string()
}

/// Everything that defines an agent variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    #[serde(default)]
    pub paradigm: Paradigm,
    #[serde(default)]
    pub features: BTreeSet<Feature>,
    #[serde(default)]
    pub orchestration: Orchestration,
    /// Budget of individual tool calls per task (shared across phases).
    #[serde(default = "default_max_tool_calls")]
    pub max_tool_calls: usize,
    /// Model identifier passed to the provider and priced in reports.
    #[serde(default = "default_model")]
    pub model: String,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            paradigm: Paradigm::default(),
            features: BTreeSet::new(),
            orchestration: Orchestration::default(),
            max_tool_calls: DEFAULT_MAX_TOOL_CALLS,
            model: default_model(),
        }
    }
}

/// Errors raised while assembling or running an agent.
#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("unsupported paradigm: {0}")]
    UnsupportedParadigm(String),
    #[error("duplicate tool name: {0}")]
    DuplicateTool(String),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// What one tool dispatch produced: the observation text shown to the model
/// verbatim, plus execution metadata when a shell ran.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub observation: String,
    pub exec: Option<ExecResult>,
}

/// A named group of tools the episode engine can route calls to.
pub trait Toolset {
    /// Stable name used in share accounting (`terminal`, `registry`, …).
    fn name(&self) -> &str;
    /// Schemas advertised to the provider.
    fn schemas(&self) -> Vec<ToolSchema>;
    /// Execute one call. Must not panic on bad arguments; failures become
    /// observations so the episode keeps running.
    fn dispatch(&mut self, invocation: &ToolInvocation) -> DispatchResult;
}

/// The shell toolset: a single `terminal` tool backed by a [`Sandbox`].
///
/// Policy is enforced here, before execution: a denied command never
/// reaches the shell — the model sees an error-envelope observation
/// explaining the refusal instead.
pub struct TerminalToolset {
    sandbox: Sandbox,
}

impl TerminalToolset {
    pub fn new(sandbox: Sandbox) -> Self {
        TerminalToolset { sandbox }
    }
}

impl Toolset for TerminalToolset {
    fn name(&self) -> &str {
        "terminal"
    }

    fn schemas(&self) -> Vec<ToolSchema> {
        vec![ToolSchema::new(
            "terminal",
            "Execute a shell command in the task workspace and return its output.",
            vec![ToolParam::required("command", "string")],
        )]
    }

    fn dispatch(&mut self, invocation: &ToolInvocation) -> DispatchResult {
        let Some(command) = invocation.str_arg("command") else {
            return DispatchResult {
                observation: error_envelope("missing required argument \"command\"", None),
                exec: None,
            };
        };
        if let PolicyDecision::Deny(reason) = self.sandbox.check(command) {
            return DispatchResult {
                observation: error_envelope("request blocked by sandbox policy", Some(&reason)),
                exec: None,
            };
        }
        match self.sandbox.execute(command) {
            Ok(exec) => DispatchResult {
                observation: render_observation(&exec),
                exec: Some(exec),
            },
            Err(err) => DispatchResult {
                observation: error_envelope("sandbox execution failed", Some(&err.to_string())),
                exec: None,
            },
        }
    }
}

fn error_envelope(message: &str, detail: Option<&str>) -> String {
    json!({
        "error": { "message": message, "detail": detail },
        "status": "failure"
    })
    .to_string()
}

/// Why an episode stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// The model answered with a turn containing no tool calls.
    FinalMessage,
    /// The tool-call budget was exhausted.
    Limit,
    /// The provider failed; see [`Trace::provider_error`].
    ProviderError,
}

impl TerminationReason {
    /// Stable snake_case name, matching the serialized form.
    pub fn name(&self) -> &'static str {
        match self {
            TerminationReason::FinalMessage => "final_message",
            TerminationReason::Limit => "limit",
            TerminationReason::ProviderError => "provider_error",
        }
    }
}

/// One dispatched tool call: the request, the observation the model saw
/// (byte for byte), execution metadata, and its classified outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutcomeRecord {
    pub invocation: ToolInvocation,
    pub observation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec: Option<ExecResult>,
    pub outcome: OutcomeCategory,
}

/// One model turn plus the results of the calls it made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub model_turn: ModelTurn,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_results: Vec<ToolOutcomeRecord>,
    /// Phase label under planner–executor orchestration; absent otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
}

/// Full record of one episode, sufficient to replay its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// Task this trace belongs to; filled in by the harness.
    #[serde(default)]
    pub task_id: String,
    pub steps: Vec<TraceStep>,
    pub total_usage: TokenUsage,
    /// Exact cost of `total_usage`; zero until priced by the harness.
    #[serde(default = "Cost::zero")]
    pub total_cost: Cost,
    /// Number of tool calls actually dispatched.
    pub tool_call_count: usize,
    /// Wall-clock episode duration in seconds.
    pub wall_clock: f64,
    /// Text of the terminating turn; empty unless the episode ended with
    /// [`TerminationReason::FinalMessage`].
    #[serde(default)]
    pub final_message: String,
    /// Fraction of dispatched calls handled by each toolset; sums to 1
    /// whenever any call was made.
    #[serde(default)]
    pub toolset_shares: ToolsetShares,
    pub termination: TerminationReason,
    /// Per-phase usage under planner–executor orchestration.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phase_usage: BTreeMap<String, TokenUsage>,
    /// True when the executor ran without a plan because plan extraction
    /// failed.
    #[serde(default)]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_error: Option<String>,
}

/// Outcome of one phase of an episode (a whole episode is one phase under
/// single orchestration).
pub(crate) struct PhaseOutcome {
    pub steps: Vec<TraceStep>,
    pub usage: TokenUsage,
    pub tool_call_count: usize,
    pub final_message: String,
    pub termination: TerminationReason,
    pub provider_error: Option<String>,
}

/// Flatten toolsets into provider-facing schemas plus routing tables.
///
/// Returns `(schemas, tool → toolset index, tool → toolset name)`; a tool
/// name provided by two toolsets is a configuration error.
pub(crate) fn index_toolsets(
    toolsets: &[Box<dyn Toolset>],
) -> Result<
    (
        Vec<ToolSchema>,
        BTreeMap<String, usize>,
        BTreeMap<String, String>,
    ),
    AgentError,
> {
    let mut schemas = Vec::new();
    let mut routing = BTreeMap::new();
    let mut names = BTreeMap::new();
    for (index, toolset) in toolsets.iter().enumerate() {
        for schema in toolset.schemas() {
            if routing.insert(schema.name.clone(), index).is_some() {
                return Err(AgentError::DuplicateTool(schema.name));
            }
            names.insert(schema.name.clone(), toolset.name().to_string());
            schemas.push(schema);
        }
    }
    Ok((schemas, routing, names))
}

/// Per-toolset fractions of all dispatched calls in `steps`.
///
/// Calls whose tool name is missing from `names` count under
/// [`UNKNOWN_TOOLSET`], so the fractions always sum to 1 when any call was
/// dispatched; no calls yields an empty map.
pub(crate) fn compute_shares(
    steps: &[TraceStep],
    names: &BTreeMap<String, String>,
) -> ToolsetShares {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for step in steps {
        for record in &step.tool_results {
            let toolset = names
                .get(&record.invocation.tool_name)
                .map(String::as_str)
                .unwrap_or(UNKNOWN_TOOLSET);
            *counts.entry(toolset.to_string()).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return ToolsetShares::new();
    }
    counts
        .into_iter()
        .map(|(name, count)| (name, count as f64 / total as f64))
        .collect()
}

/// Drive the provider/tool loop until a final message, the budget, or a
/// provider failure stops it.
///
/// `budget` counts individual tool calls. When the model requests more
/// calls than the budget has left, the turn is cut mid-way: calls past the
/// limit are not dispatched. Reaching the budget terminates the phase even
/// if the last turn was dispatched completely — the model does not get
/// another turn to compose a final message.
pub(crate) fn run_phase(
    history: &mut Vec<ChatMessage>,
    toolsets: &mut [Box<dyn Toolset>],
    routing: &BTreeMap<String, usize>,
    schemas: &[ToolSchema],
    provider: &dyn Provider,
    model: &str,
    budget: usize,
    phase: Option<&str>,
    next_call_ordinal: &mut usize,
) -> PhaseOutcome {
    let mut steps = Vec::new();
    let mut usage = TokenUsage::default();
    let mut calls = 0usize;

    let (final_message, termination, provider_error) = loop {
        if calls >= budget {
            break (String::new(), TerminationReason::Limit, None);
        }
        let mut turn = match provider.complete(history, schemas, model) {
            Ok(turn) => turn,
            Err(err) => {
                break (
                    String::new(),
                    TerminationReason::ProviderError,
                    Some(err.to_string()),
                )
            }
        };
        usage += turn.usage;

        if turn.tool_calls.is_empty() {
            let text = turn.text.clone().unwrap_or_default();
            history.push(ChatMessage::assistant(text.clone(), Vec::new()));
            steps.push(TraceStep {
                model_turn: turn,
                tool_results: Vec::new(),
                phase: phase.map(String::from),
            });
            break (text, TerminationReason::FinalMessage, None);
        }

        // Assign pairing ids before anything is recorded, so the trace and
        // the conversation history agree on them.
        for invocation in &mut turn.tool_calls {
            if invocation.id.is_empty() {
                invocation.id = format!("call_{}", *next_call_ordinal);
            }
            *next_call_ordinal += 1;
        }
        history.push(ChatMessage::assistant(
            turn.text.clone().unwrap_or_default(),
            turn.tool_calls.clone(),
        ));

        let mut results = Vec::new();
        let mut halted = false;
        for invocation in &turn.tool_calls {
            if calls >= budget {
                halted = true;
                break;
            }
            calls += 1;
            let dispatch = match routing.get(&invocation.tool_name) {
                Some(&index) => toolsets[index].dispatch(invocation),
                None => DispatchResult {
                    observation: error_envelope(
                        &format!("no tool named {:?}", invocation.tool_name),
                        None,
                    ),
                    exec: None,
                },
            };
            let outcome = classify_outcome(&dispatch.observation, dispatch.exec.as_ref());
            history.push(ChatMessage::tool(
                invocation.id.clone(),
                dispatch.observation.clone(),
            ));
            results.push(ToolOutcomeRecord {
                invocation: invocation.clone(),
                observation: dispatch.observation,
                exec: dispatch.exec,
                outcome,
            });
        }
        steps.push(TraceStep {
            model_turn: turn,
            tool_results: results,
            phase: phase.map(String::from),
        });
        if halted || calls >= budget {
            break (String::new(), TerminationReason::Limit, None);
        }
    };

    PhaseOutcome {
        steps,
        usage,
        tool_call_count: calls,
        final_message,
        termination,
        provider_error,
    }
}

/// Run one episode: `goal` under `system_prompt` against `toolsets`.
///
/// The returned trace records every model turn and every dispatched call
/// with its observation byte for byte. `task_id` is left empty and
/// `total_cost` zero; the harness fills both in.
pub fn run_episode(
    goal: &str,
    system_prompt: &str,
    config: &AgentConfig,
    toolsets: &mut [Box<dyn Toolset>],
    provider: &dyn Provider,
) -> Result<Trace, AgentError> {
    let started = Instant::now();
    let (schemas, routing, names) = index_toolsets(toolsets)?;
    let mut history = vec![ChatMessage::system(system_prompt), ChatMessage::user(goal)];
    let mut next_call_ordinal = 0usize;
    let phase = run_phase(
        &mut history,
        toolsets,
        &routing,
        &schemas,
        provider,
        &config.model,
        config.max_tool_calls,
        None,
        &mut next_call_ordinal,
    );
    let toolset_shares = compute_shares(&phase.steps, &names);
    Ok(Trace {
        task_id: String::new(),
        steps: phase.steps,
        total_usage: phase.usage,
        total_cost: Cost::zero(),
        tool_call_count: phase.tool_call_count,
        wall_clock: started.elapsed().as_secs_f64(),
        final_message: phase.final_message,
        toolset_shares,
        termination: phase.termination,
        phase_usage: BTreeMap::new(),
        fallback: false,
        provider_error: phase.provider_error,
    })
}

/// Per-task environment an episode runs in: platform reachability, the task
/// workspace, and shell limits.
#[derive(Clone)]
pub struct EpisodeSetup {
    pub profile: Profile,
    pub base_url: String,
    pub workdir: PathBuf,
    /// Environment exported into every shell command.
    pub env: BTreeMap<String, String>,
    pub limits: ExecLimits,
    pub platform: PlatformHandle,
}

impl EpisodeSetup {
    /// Standard setup: platform credentials exported, default shell limits.
    pub fn new(
        profile: Profile,
        base_url: impl Into<String>,
        workdir: impl Into<PathBuf>,
        platform: PlatformHandle,
    ) -> Self {
        let base_url = base_url.into();
        EpisodeSetup {
            env: profile.env_for(&base_url),
            profile,
            base_url,
            workdir: workdir.into(),
            limits: ExecLimits::default(),
            platform,
        }
    }
}

/// Instantiate the toolsets a paradigm calls for.
///
/// `read_only_http` selects the restricted shell policy (used for planning
/// phases); it affects only terminal toolsets.
pub fn build_toolsets(
    config: &AgentConfig,
    setup: &EpisodeSetup,
    read_only_http: bool,
) -> Result<Vec<Box<dyn Toolset>>, AgentError> {
    let terminal = || -> Result<Box<dyn Toolset>, AgentError> {
        let mut policy = if read_only_http {
            SandboxPolicy::read_only_http(&setup.workdir)
        } else {
            SandboxPolicy::unrestricted(&setup.workdir)
        };
        for (name, value) in &setup.env {
            policy = policy.with_env(name, value);
        }
        Ok(Box::new(TerminalToolset::new(Sandbox::new(
            policy,
            setup.limits,
        )?)))
    };
    let registry = || -> Box<dyn Toolset> {
        Box::new(RegistryToolset::new(ToolRegistry::with_platform_tools(
            setup.platform.clone(),
            setup.profile,
            &setup.base_url,
        )))
    };
    match config.paradigm {
        Paradigm::Terminal => Ok(vec![terminal()?]),
        Paradigm::ToolRegistry => Ok(vec![registry()]),
        Paradigm::Hybrid => Ok(vec![terminal()?, registry()]),
        Paradigm::WebAdapter => Err(AgentError::UnsupportedParadigm(
            Paradigm::WebAdapter.name().to_string(),
        )),
    }
}

/// Run one task as a single episode with the paradigm's standard prompt.
pub fn run_single_agent(
    goal: &str,
    config: &AgentConfig,
    setup: &EpisodeSetup,
    provider: &dyn Provider,
) -> Result<Trace, AgentError> {
    let system_prompt = assemble_system_prompt(setup.profile, &setup.base_url, config)?;
    let mut toolsets = build_toolsets(config, setup, false)?;
    run_episode(goal, &system_prompt, config, &mut toolsets, provider)
}
