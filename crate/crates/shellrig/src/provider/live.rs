//! Live backend speaking the generic HTTP chat-completions wire contract.
//!
//! Vendor differences are configuration (base URL, key, model id), not code
//! paths. Endpoint and credentials come from `PROVIDER_BASE_URL` and
//! `PROVIDER_API_KEY`. Sampling parameters are not set; vendor defaults apply.

use serde::Deserialize;
use serde_json::{json, Value};

use super::{ChatMessage, ModelTurn, Provider, ProviderError, Role, TokenUsage, ToolInvocation, ToolSchema};

/// Environment variable naming the chat-completions base URL.
pub const ENV_BASE_URL: &str = "PROVIDER_BASE_URL";
/// Environment variable holding the bearer credential.
pub const ENV_API_KEY: &str = "PROVIDER_API_KEY";

/// HTTP chat-completions client.
pub struct LiveProvider {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl LiveProvider {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build();
        LiveProvider {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    /// Construct from `PROVIDER_BASE_URL` / `PROVIDER_API_KEY`.
    pub fn from_env() -> Result<Self, ProviderError> {
        let base_url = std::env::var(ENV_BASE_URL)
            .map_err(|_| ProviderError::Unconfigured(format!("{ENV_BASE_URL} is not set")))?;
        let api_key = std::env::var(ENV_API_KEY)
            .map_err(|_| ProviderError::Unconfigured(format!("{ENV_API_KEY} is not set")))?;
        Ok(Self::new(base_url, api_key))
    }

    fn request_body(history: &[ChatMessage], tool_schemas: &[ToolSchema], model: &str) -> Value {
        let messages: Vec<Value> = history.iter().map(wire_message).collect();
        let mut body = json!({ "model": model, "messages": messages });
        if !tool_schemas.is_empty() {
            let tools: Vec<Value> = tool_schemas.iter().map(wire_tool).collect();
            body["tools"] = Value::Array(tools);
        }
        body
    }
}

fn wire_message(msg: &ChatMessage) -> Value {
    match msg.role {
        Role::System => json!({ "role": "system", "content": msg.content }),
        Role::User => json!({ "role": "user", "content": msg.content }),
        Role::Assistant => {
            let mut m = json!({ "role": "assistant" });
            m["content"] = if msg.content.is_empty() {
                Value::Null
            } else {
                Value::String(msg.content.clone())
            };
            if !msg.tool_calls.is_empty() {
                let calls: Vec<Value> = msg
                    .tool_calls
                    .iter()
                    .map(|c| {
                        json!({
                            "id": c.id,
                            "type": "function",
                            "function": {
                                "name": c.tool_name,
                                "arguments": Value::Object(c.arguments.clone()).to_string(),
                            },
                        })
                    })
                    .collect();
                m["tool_calls"] = Value::Array(calls);
            }
            m
        }
        Role::Tool => json!({
            "role": "tool",
            "tool_call_id": msg.tool_call_id.clone().unwrap_or_default(),
            "content": msg.content,
        }),
    }
}

fn wire_tool(schema: &ToolSchema) -> Value {
    let mut properties = serde_json::Map::new();
    let mut required = Vec::new();
    for param in &schema.parameters {
        properties.insert(param.name.clone(), json!({ "type": param.param_type }));
        if param.required {
            required.push(Value::String(param.name.clone()));
        }
    }
    json!({
        "type": "function",
        "function": {
            "name": schema.name,
            "description": schema.description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": required,
            },
        },
    })
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    tool_calls: Vec<WireToolCall>,
}

#[derive(Deserialize)]
struct WireToolCall {
    id: String,
    function: WireFunction,
}

#[derive(Deserialize)]
struct WireFunction {
    name: String,
    arguments: String,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

fn parse_response(text: &str) -> Result<ModelTurn, ProviderError> {
    let wire: WireResponse = serde_json::from_str(text)
        .map_err(|e| ProviderError::MalformedResponse(format!("{e}: {}", clip(text))))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ProviderError::MalformedResponse("response has no choices".into()))?;
    let mut tool_calls = Vec::with_capacity(choice.message.tool_calls.len());
    for call in choice.message.tool_calls {
        let arguments: serde_json::Map<String, Value> = serde_json::from_str(&call.function.arguments)
            .map_err(|e| {
                ProviderError::MalformedResponse(format!(
                    "tool call {} has non-object arguments: {e}",
                    call.function.name
                ))
            })?;
        tool_calls.push(ToolInvocation::new(call.id, call.function.name, arguments));
    }
    let usage = wire
        .usage
        .map(|u| TokenUsage::new(u.prompt_tokens, u.completion_tokens))
        .unwrap_or_default();
    let turn = ModelTurn {
        text: choice.message.content.filter(|c| !c.is_empty()),
        tool_calls,
        usage,
    };
    turn.validate()?;
    Ok(turn)
}

fn clip(s: &str) -> String {
    let mut end = s.len().min(200);
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    s[..end].to_string()
}

impl Provider for LiveProvider {
    fn complete(
        &self,
        history: &[ChatMessage],
        tool_schemas: &[ToolSchema],
        model: &str,
    ) -> Result<ModelTurn, ProviderError> {
        let body = Self::request_body(history, tool_schemas, model);
        let url = format!("{}/chat/completions", self.base_url);
        let mut response = self
            .agent
            .post(&url)
            .header("authorization", &format!("Bearer {}", self.api_key))
            .header("content-type", "application/json")
            .send(body.to_string())
            .map_err(|e| ProviderError::BackendUnreachable(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::BackendUnreachable(e.to_string()))?;
        if status >= 400 {
            let lowered = text.to_ascii_lowercase();
            if lowered.contains("context_length") || lowered.contains("context limit") {
                return Err(ProviderError::ContextLimitExceeded(clip(&text)));
            }
            return Err(ProviderError::BackendUnreachable(format!(
                "HTTP {status}: {}",
                clip(&text)
            )));
        }
        parse_response(&text)
    }
}
