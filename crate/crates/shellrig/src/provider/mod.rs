//! Uniform interface to language-model backends.
//!
//! Ships a deterministic [`ScriptedProvider`] for tests and benchmarks with
//! known trajectories, and a [`LiveProvider`] speaking a generic HTTP
//! chat-completions wire contract. Token usage and monetary cost are
//! accounted exactly (rational arithmetic, rounded only at report time).

mod live;
mod pricing;
mod scripted;

pub use live::LiveProvider;
pub use pricing::{Cost, ModelPricing, PricingError, PricingTable};
pub use scripted::{make_scripted, ExhaustionPolicy, ScriptedProvider, TurnScript, SCRIPT_FINAL_MESSAGE};

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Conversation roles for [`ChatMessage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

/// One message in an episode's conversation history.
///
/// Tool messages carry the `tool_call_id` of the assistant invocation they
/// answer; assistant messages carry the tool calls they emitted so the
/// history is replayable against chat-completions backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolInvocation>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>, tool_calls: Vec<ToolInvocation>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
            tool_call_id: None,
            tool_calls,
        }
    }

    /// A tool-result message answering the invocation with id `call_id`.
    pub fn tool(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Tool,
            content: content.into(),
            tool_call_id: Some(call_id.into()),
            tool_calls: Vec::new(),
        }
    }

    fn plain(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
            tool_call_id: None,
            tool_calls: Vec::new(),
        }
    }
}

/// A single tool call requested by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    /// Pairing id echoed back on the tool observation; scripts may omit it
    /// and let the episode loop assign one.
    #[serde(default)]
    pub id: String,
    pub tool_name: String,
    #[serde(default)]
    pub arguments: serde_json::Map<String, serde_json::Value>,
}

impl ToolInvocation {
    pub fn new(
        id: impl Into<String>,
        tool_name: impl Into<String>,
        arguments: serde_json::Map<String, serde_json::Value>,
    ) -> Self {
        ToolInvocation {
            id: id.into(),
            tool_name: tool_name.into(),
            arguments,
        }
    }

    /// Convenience accessor for a string-valued argument.
    pub fn str_arg(&self, name: &str) -> Option<&str> {
        self.arguments.get(name).and_then(|v| v.as_str())
    }
}

/// One provider response: text, zero or more tool calls, and token usage.
///
/// A turn has text, tool calls, or both — never neither; [`ModelTurn::validate`]
/// enforces this where turns enter from external sources (script files).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTurn {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolInvocation>,
    #[serde(default)]
    pub usage: TokenUsage,
}

impl ModelTurn {
    /// A text-only (final-message) turn.
    pub fn text(text: impl Into<String>, usage: TokenUsage) -> Self {
        ModelTurn {
            text: Some(text.into()),
            tool_calls: Vec::new(),
            usage,
        }
    }

    /// A tool-calling turn with optional accompanying text.
    pub fn tools(text: Option<String>, tool_calls: Vec<ToolInvocation>, usage: TokenUsage) -> Self {
        ModelTurn {
            text,
            tool_calls,
            usage,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let has_text = self.text.as_deref().is_some_and(|t| !t.is_empty());
        if !has_text && self.tool_calls.is_empty() {
            return Err(ProviderError::MalformedResponse(
                "turn has neither text nor tool calls".into(),
            ));
        }
        Ok(())
    }
}

/// Token counts for one turn or one episode; additive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        TokenUsage {
            input_tokens,
            output_tokens,
        }
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            input_tokens: self.input_tokens + rhs.input_tokens,
            output_tokens: self.output_tokens + rhs.output_tokens,
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

/// Declared parameter of a registered tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolParam {
    pub name: String,
    /// Semantic type tag, e.g. `string`, `object`, `integer`.
    pub param_type: String,
    pub required: bool,
}

impl ToolParam {
    pub fn required(name: impl Into<String>, param_type: impl Into<String>) -> Self {
        ToolParam {
            name: name.into(),
            param_type: param_type.into(),
            required: true,
        }
    }

    pub fn optional(name: impl Into<String>, param_type: impl Into<String>) -> Self {
        ToolParam {
            required: false,
            ..Self::required(name, param_type)
        }
    }
}

/// Name, description, and parameters of a dispatchable tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ToolParam>,
}

impl ToolSchema {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        parameters: Vec<ToolParam>,
    ) -> Self {
        ToolSchema {
            name: name.into(),
            description: description.into(),
            parameters,
        }
    }
}

/// Errors surfaced by [`Provider::complete`].
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum ProviderError {
    #[error("backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("context limit exceeded: {0}")]
    ContextLimitExceeded(String),
    #[error("script exhausted after {0} turns")]
    ScriptExhausted(usize),
    #[error("provider unconfigured: {0}")]
    Unconfigured(String),
}

/// A language-model backend.
///
/// Handles are immutable after construction and safe to share across
/// episodes; the scripted provider serializes calls internally.
pub trait Provider: Send + Sync {
    /// Produce the next model turn for `history`.
    ///
    /// `history` must be non-empty and start with a system message. Backend
    /// failures surface as errors, never as empty turns.
    fn complete(
        &self,
        history: &[ChatMessage],
        tool_schemas: &[ToolSchema],
        model: &str,
    ) -> Result<ModelTurn, ProviderError>;
}

impl<T: Provider + ?Sized> Provider for std::sync::Arc<T> {
    fn complete(
        &self,
        history: &[ChatMessage],
        tool_schemas: &[ToolSchema],
        model: &str,
    ) -> Result<ModelTurn, ProviderError> {
        (**self).complete(history, tool_schemas, model)
    }
}

/// Compute the exact monetary cost of `usage` under `model`'s pricing.
///
/// `cost = input_tokens · input_price/1e6 + output_tokens · output_price/1e6`,
/// carried as an exact rational; rounding happens only at report emission.
pub fn compute_cost(
    usage: TokenUsage,
    model: &str,
    pricing: &PricingTable,
) -> Result<Cost, PricingError> {
    pricing.cost(usage, model)
}

/// Per-toolset tool-call fractions; used by hybrid-agent accounting.
pub type ToolsetShares = BTreeMap<String, f64>;
