//! System-prompt assembly.
//!
//! Prompt bodies live as markdown templates next to this module and are
//! rendered against a platform profile: `{platform}` / `{a_platform}` become
//! the vendor name (with its article), `{url}` the instance base URL,
//! `{headers_var}` the profile's auth-flags environment variable,
//! `{list_route}` a representative collection route, and `{link_example}` a
//! deep-link example. Feature extensions are appended in a fixed order
//! (docs, then skills) so assembled prompts are deterministic.

use super::{AgentConfig, AgentError, Feature, Paradigm};
use crate::platform::Profile;

const TERMINAL: &str = include_str!("prompts/terminal.md");
const TOOL_REGISTRY: &str = include_str!("prompts/tool_registry.md");
const HYBRID: &str = include_str!("prompts/hybrid.md");
const DOCS_EXTENSION: &str = include_str!("prompts/docs_extension.md");
const SKILLS_EXTENSION: &str = include_str!("prompts/skills_extension.md");
const PLANNER: &str = include_str!("prompts/planner.md");
const EXECUTOR: &str = include_str!("prompts/executor.md");

/// Heading under which the extracted plan is appended to the executor
/// prompt.
pub const PLAN_HEADING: &str = "## Plan from the planner";

/// Which role prompt to assemble for planner–executor orchestration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptRole {
    Planner,
    Executor,
}

fn render(template: &str, profile: Profile, base_url: &str) -> String {
    let (article_name, name) = match profile {
        Profile::ServiceNow => ("a ServiceNow", "ServiceNow"),
        Profile::Erpnext => ("an ERPNext", "ERPNext"),
    };
    let list_route = match profile {
        Profile::ServiceNow => "/api/now/table/incident",
        Profile::Erpnext => "/api/resource/incident",
    };
    let link_example = match profile {
        Profile::ServiceNow => profile.record_link(base_url, "incident", "<sys_id>"),
        Profile::Erpnext => profile.record_link(base_url, "<doctype>", "<name>"),
    };
    template
        .replace("{a_platform}", article_name)
        .replace("{platform}", name)
        .replace("{url}", base_url)
        .replace("{headers_var}", profile.headers_env_var())
        .replace("{list_route}", list_route)
        .replace("{link_example}", &link_example)
}

fn append_extensions(prompt: &mut String, features: impl Iterator<Item = Feature> + Clone, profile: Profile, base_url: &str) {
    // Fixed order regardless of set iteration details: docs, then skills.
    for (feature, template) in [
        (Feature::Docs, DOCS_EXTENSION),
        (Feature::Skills, SKILLS_EXTENSION),
    ] {
        if features.clone().any(|f| f == feature) {
            prompt.push('\n');
            prompt.push_str(&render(template, profile, base_url));
        }
    }
}

/// Assemble the system prompt for a single-agent episode: the paradigm's
/// base prompt plus any enabled feature extensions.
pub fn assemble_system_prompt(
    profile: Profile,
    base_url: &str,
    config: &AgentConfig,
) -> Result<String, AgentError> {
    let template = match config.paradigm {
        Paradigm::Terminal => TERMINAL,
        Paradigm::ToolRegistry => TOOL_REGISTRY,
        Paradigm::Hybrid => HYBRID,
        Paradigm::WebAdapter => {
            return Err(AgentError::UnsupportedParadigm(
                "web_adapter has no built-in prompt or toolset; supply both externally"
                    .to_string(),
            ))
        }
    };
    let mut prompt = render(template, profile, base_url);
    append_extensions(&mut prompt, config.features.iter().copied(), profile, base_url);
    Ok(prompt)
}

/// Assemble a planner or executor phase prompt. The executor's plan section
/// is appended separately by the orchestrator once a plan exists.
pub fn assemble_role_prompt(
    role: PromptRole,
    profile: Profile,
    base_url: &str,
    config: &AgentConfig,
) -> String {
    let template = match role {
        PromptRole::Planner => PLANNER,
        PromptRole::Executor => EXECUTOR,
    };
    let mut prompt = render(template, profile, base_url);
    append_extensions(&mut prompt, config.features.iter().copied(), profile, base_url);
    prompt
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(paradigm: Paradigm, features: &[Feature]) -> AgentConfig {
        AgentConfig {
            paradigm,
            features: features.iter().copied().collect(),
            ..AgentConfig::default()
        }
    }

    #[test]
    fn terminal_prompt_has_instance_url_and_eval_guidance() {
        let prompt = assemble_system_prompt(
            Profile::ServiceNow,
            "http://127.0.0.1:7001",
            &config(Paradigm::Terminal, &[]),
        )
        .unwrap();
        assert!(prompt.starts_with("You are a ServiceNow assistant with terminal access."));
        assert!(prompt.contains("Instance URL: http://127.0.0.1:7001"));
        assert!(prompt.contains("Use eval so the flags expand correctly"));
        assert!(prompt.contains("$SERVICENOW_EXTRA_HTTP_HEADERS"));
        assert!(prompt.contains("sysparm_query=active=true^ORDERBYDESCsys_created_on"));
        assert!(prompt.contains(
            "http://127.0.0.1:7001/now/nav/ui/classic/params/target/incident.do?sys_id=<sys_id>"
        ));
        assert!(!prompt.contains("{platform}"));
        assert!(!prompt.contains("{url}"));
    }

    #[test]
    fn skills_extension_appends_the_memory_contract() {
        let prompt = assemble_system_prompt(
            Profile::ServiceNow,
            "http://x",
            &config(Paradigm::Terminal, &[Feature::Skills]),
        )
        .unwrap();
        assert!(prompt.contains("skills/** - Your persistent memory"));
        assert!(prompt.contains("**Always search it before starting a task.**"));
        assert!(prompt.contains("**Status:** unverified"));
        assert!(prompt.contains("## Pitfalls"));
    }

    #[test]
    fn docs_extension_appends_the_docs_first_rule() {
        let prompt = assemble_system_prompt(
            Profile::ServiceNow,
            "http://x",
            &config(Paradigm::Terminal, &[Feature::Docs]),
        )
        .unwrap();
        assert!(prompt.contains("**Always consult the docs/ directory first**"));
    }

    #[test]
    fn both_extensions_append_in_docs_then_skills_order() {
        let prompt = assemble_system_prompt(
            Profile::ServiceNow,
            "http://x",
            &config(Paradigm::Terminal, &[Feature::Skills, Feature::Docs]),
        )
        .unwrap();
        let docs_at = prompt.find("Always consult the docs/").unwrap();
        let skills_at = prompt.find("Your persistent memory").unwrap();
        assert!(docs_at < skills_at);
    }

    #[test]
    fn erpnext_rendering_uses_its_article_env_var_and_routes() {
        let prompt = assemble_system_prompt(
            Profile::Erpnext,
            "http://e",
            &config(Paradigm::Terminal, &[]),
        )
        .unwrap();
        assert!(prompt.starts_with("You are an ERPNext assistant"));
        assert!(prompt.contains("$ERPNEXT_EXTRA_HTTP_HEADERS"));
        assert!(prompt.contains("/api/resource/incident"));
        assert!(prompt.contains("http://e/app/<doctype>/<name>"));
    }

    #[test]
    fn registry_prompt_pushes_error_recovery() {
        let prompt = assemble_system_prompt(
            Profile::ServiceNow,
            "http://x",
            &config(Paradigm::ToolRegistry, &[]),
        )
        .unwrap();
        assert!(prompt.contains("read the error message carefully and adjust"));
        assert!(prompt.contains("do not retry the exact same call"));
    }

    #[test]
    fn hybrid_prompt_names_both_toolsets_and_the_switch_rule() {
        let prompt = assemble_system_prompt(
            Profile::ServiceNow,
            "http://x",
            &config(Paradigm::Hybrid, &[]),
        )
        .unwrap();
        assert!(prompt.contains("two toolsets"));
        assert!(prompt.contains("**If an approach fails twice with the same error**"));
    }

    #[test]
    fn web_adapter_has_no_builtin_prompt() {
        let err = assemble_system_prompt(
            Profile::ServiceNow,
            "http://x",
            &config(Paradigm::WebAdapter, &[]),
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::UnsupportedParadigm(_)));
    }

    #[test]
    fn planner_and_executor_role_prompts() {
        let cfg = config(Paradigm::Terminal, &[]);
        let planner = assemble_role_prompt(PromptRole::Planner, Profile::ServiceNow, "http://x", &cfg);
        assert!(planner.contains("You are the PLANNER"));
        assert!(planner.contains("Do **NOT** attempt to complete the task yourself."));
        assert!(planner.contains("### Plan"));

        let executor = assemble_role_prompt(PromptRole::Executor, Profile::ServiceNow, "http://x", &cfg);
        assert!(executor.contains("You are the EXECUTOR"));
        assert!(executor.contains("stay as close to the plan as possible"));
        assert!(!executor.contains(PLAN_HEADING), "plan section is appended at run time");
    }
}
