//! Planner–executor orchestration: a read-only planning episode whose plan
//! is handed to an execution episode, under one shared tool-call budget.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::provider::{ChatMessage, Cost, Provider};
use crate::sandbox::{Sandbox, SandboxPolicy};

use super::{
    assemble_role_prompt, assemble_system_prompt, build_toolsets, compute_shares, extract_plan,
    index_toolsets, run_phase, AgentConfig, AgentError, EpisodeSetup, PromptRole,
    TerminalToolset, TerminationReason, Toolset, Trace, PLAN_HEADING,
};

pub(crate) const PLANNER_PHASE: &str = "planner";
pub(crate) const EXECUTOR_PHASE: &str = "executor";

/// Run one task as a planning episode followed by an execution episode.
///
/// The planner works terminal-only under the read-only-HTTP shell policy:
/// it can inspect the platform but any state-changing API call is denied
/// before it executes. Its final message is parsed for a `### Plan`
/// section; the rendered plan is appended to the executor's system prompt
/// under [`PLAN_HEADING`]. If no plan can be extracted, the executor runs
/// with the plain single-agent prompt instead and the trace is flagged
/// `fallback`.
///
/// Both phases draw on one budget: the executor gets whatever the planner
/// left of `config.max_tool_calls`.
pub fn run_planner_executor(
    goal: &str,
    config: &AgentConfig,
    setup: &EpisodeSetup,
    provider: &dyn Provider,
) -> Result<Trace, AgentError> {
    let started = Instant::now();
    let mut next_call_ordinal = 0usize;

    // Phase 1: planning, terminal-only, read-only shell policy.
    let mut planner_policy = SandboxPolicy::read_only_http(&setup.workdir);
    for (name, value) in &setup.env {
        planner_policy = planner_policy.with_env(name, value);
    }
    let mut planner_toolsets: Vec<Box<dyn Toolset>> = vec![Box::new(TerminalToolset::new(
        Sandbox::new(planner_policy, setup.limits)?,
    ))];
    let (planner_schemas, planner_routing, mut names) = index_toolsets(&planner_toolsets)?;
    let planner_prompt =
        assemble_role_prompt(PromptRole::Planner, setup.profile, &setup.base_url, config);
    let mut planner_history = vec![
        ChatMessage::system(&planner_prompt),
        ChatMessage::user(goal),
    ];
    let planning = run_phase(
        &mut planner_history,
        &mut planner_toolsets,
        &planner_routing,
        &planner_schemas,
        provider,
        &config.model,
        config.max_tool_calls,
        Some(PLANNER_PHASE),
        &mut next_call_ordinal,
    );

    let mut phase_usage = BTreeMap::new();
    phase_usage.insert(PLANNER_PHASE.to_string(), planning.usage);

    if planning.termination == TerminationReason::ProviderError {
        let toolset_shares = compute_shares(&planning.steps, &names);
        return Ok(Trace {
            task_id: String::new(),
            steps: planning.steps,
            total_usage: planning.usage,
            total_cost: Cost::zero(),
            tool_call_count: planning.tool_call_count,
            wall_clock: started.elapsed().as_secs_f64(),
            final_message: String::new(),
            toolset_shares,
            termination: TerminationReason::ProviderError,
            phase_usage,
            fallback: false,
            provider_error: planning.provider_error,
        });
    }

    // Phase 2: execution with the paradigm's toolsets and whatever budget
    // the planner left.
    let (executor_prompt, fallback) = match extract_plan(&planning.final_message) {
        Ok(plan) => {
            let role_prompt =
                assemble_role_prompt(PromptRole::Executor, setup.profile, &setup.base_url, config);
            (
                format!("{role_prompt}\n\n{PLAN_HEADING}\n\n{}", plan.render_steps()),
                false,
            )
        }
        Err(_) => (
            assemble_system_prompt(setup.profile, &setup.base_url, config)?,
            true,
        ),
    };
    let budget = config.max_tool_calls.saturating_sub(planning.tool_call_count);
    let mut executor_toolsets = build_toolsets(config, setup, false)?;
    let (executor_schemas, executor_routing, executor_names) =
        index_toolsets(&executor_toolsets)?;
    names.extend(executor_names);
    let mut executor_history = vec![
        ChatMessage::system(&executor_prompt),
        ChatMessage::user(goal),
    ];
    let execution = run_phase(
        &mut executor_history,
        &mut executor_toolsets,
        &executor_routing,
        &executor_schemas,
        provider,
        &config.model,
        budget,
        Some(EXECUTOR_PHASE),
        &mut next_call_ordinal,
    );
    phase_usage.insert(EXECUTOR_PHASE.to_string(), execution.usage);

    let mut steps = planning.steps;
    steps.extend(execution.steps);
    let toolset_shares = compute_shares(&steps, &names);
    Ok(Trace {
        task_id: String::new(),
        steps,
        total_usage: planning.usage + execution.usage,
        total_cost: Cost::zero(),
        tool_call_count: planning.tool_call_count + execution.tool_call_count,
        wall_clock: started.elapsed().as_secs_f64(),
        final_message: execution.final_message,
        toolset_shares,
        termination: execution.termination,
        phase_usage,
        fallback,
        provider_error: execution.provider_error,
    })
}
