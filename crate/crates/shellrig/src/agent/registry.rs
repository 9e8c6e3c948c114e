//! The tool-registry paradigm: a curated set of named tools with fixed
//! parameter schemas, dispatched by name.
//!
//! The built-in registry binds seven generic platform tools to the mock
//! platform handle — the same operations the HTTP facade exposes, minus the
//! transport: `authenticate`, `get_documents`, `create_document`,
//! `update_document`, `get_doctypes`, `get_doctype_fields`, `run_report`.
//! Tool failures are returned as error-envelope observations so the episode
//! keeps running and the model can read the message and adjust.

use serde_json::{json, Map, Value};

use super::{AgentError, DispatchResult, Toolset};
use crate::platform::{
    parse_query, PlatformError, PlatformHandle, Predicate, Profile, QueryOp, QueryPlan, Record,
};
use crate::provider::{ToolInvocation, ToolParam, ToolSchema};

type Handler = Box<dyn FnMut(&ToolInvocation) -> String + Send>;

struct RegisteredTool {
    schema: ToolSchema,
    handler: Handler,
}

/// A named collection of dispatchable tools.
pub struct ToolRegistry {
    tools: Vec<RegisteredTool>,
}

impl Default for ToolRegistry {
    fn default() -> Self {
        Self::new()
    }
}

/// Register a tool under a unique name.
pub fn register_tool(
    registry: &mut ToolRegistry,
    schema: ToolSchema,
    handler: impl FnMut(&ToolInvocation) -> String + Send + 'static,
) -> Result<(), AgentError> {
    if registry.tools.iter().any(|t| t.schema.name == schema.name) {
        return Err(AgentError::DuplicateTool(schema.name));
    }
    registry.tools.push(RegisteredTool {
        schema,
        handler: Box::new(handler),
    });
    Ok(())
}

impl ToolRegistry {
    pub fn new() -> Self {
        ToolRegistry { tools: Vec::new() }
    }

    /// The built-in registry: the seven generic platform tools bound to a
    /// platform handle.
    pub fn with_platform_tools(
        platform: PlatformHandle,
        profile: Profile,
        base_url: &str,
    ) -> Self {
        let mut registry = ToolRegistry::new();
        let base_url = base_url.to_string();

        let schema = ToolSchema::new(
            "authenticate",
            "Authenticate against the platform instance; credentials are taken from the environment.",
            vec![],
        );
        register_tool(&mut registry, schema, {
            let base_url = base_url.clone();
            move |_inv| {
                result_envelope(json!({
                    "authenticated": true,
                    "instance": base_url,
                    "auth_header": profile.auth_header(),
                }))
            }
        })
        .expect("built-in names are unique");

        let schema = ToolSchema::new(
            "get_documents",
            "Query records of a doctype. Optional equality filters, field projection, and a result limit.",
            vec![
                ToolParam::required("doctype", "string"),
                ToolParam::optional("filters", "object"),
                ToolParam::optional("fields", "array"),
                ToolParam::optional("limit", "number"),
                ToolParam::optional("query", "string"),
            ],
        );
        register_tool(&mut registry, schema, {
            let platform = platform.clone();
            move |inv| get_documents(&platform, inv)
        })
        .expect("built-in names are unique");

        let schema = ToolSchema::new(
            "create_document",
            "Create one record of a doctype from a values object.",
            vec![
                ToolParam::required("doctype", "string"),
                ToolParam::required("values", "object"),
            ],
        );
        register_tool(&mut registry, schema, {
            let platform = platform.clone();
            move |inv| {
                with_doctype(inv, |doctype| {
                    let values = object_arg(inv, "values")?;
                    let record = platform
                        .lock()
                        .expect("platform lock")
                        .create_record(doctype, &coerce_object(&values))?;
                    Ok(serde_json::to_value(record).expect("records serialize"))
                })
            }
        })
        .expect("built-in names are unique");

        let schema = ToolSchema::new(
            "update_document",
            "Update fields of one record, addressed by doctype and sys_id.",
            vec![
                ToolParam::required("doctype", "string"),
                ToolParam::required("name", "string"),
                ToolParam::required("values", "object"),
            ],
        );
        register_tool(&mut registry, schema, {
            let platform = platform.clone();
            move |inv| {
                with_doctype(inv, |doctype| {
                    let name = inv
                        .str_arg("name")
                        .ok_or_else(|| bad_args("missing required argument \"name\""))?;
                    let values = object_arg(inv, "values")?;
                    let record = platform
                        .lock()
                        .expect("platform lock")
                        .update_record(doctype, name, &coerce_object(&values))?;
                    Ok(serde_json::to_value(record).expect("records serialize"))
                })
            }
        })
        .expect("built-in names are unique");

        let schema = ToolSchema::new(
            "get_doctypes",
            "List the doctypes (tables) available on the instance.",
            vec![],
        );
        register_tool(&mut registry, schema, {
            let platform = platform.clone();
            move |_inv| {
                let names: Vec<Value> = platform
                    .lock()
                    .expect("platform lock")
                    .table_names()
                    .into_iter()
                    .map(|name| json!({ "name": name }))
                    .collect();
                result_envelope(Value::Array(names))
            }
        })
        .expect("built-in names are unique");

        let schema = ToolSchema::new(
            "get_doctype_fields",
            "Describe the field schema of one doctype.",
            vec![ToolParam::required("doctype", "string")],
        );
        register_tool(&mut registry, schema, {
            let platform = platform.clone();
            move |inv| {
                with_doctype(inv, |doctype| {
                    let state = platform.lock().expect("platform lock");
                    let fields: Vec<Value> = state
                        .schema(doctype)?
                        .iter()
                        .map(|field| {
                            json!({
                                "name": field.name,
                                "label": field.label,
                                "type": field.field_type,
                            })
                        })
                        .collect();
                    Ok(json!({ "name": doctype, "fields": fields }))
                })
            }
        })
        .expect("built-in names are unique");

        let schema = ToolSchema::new(
            "run_report",
            "Run a count report over a doctype, optionally filtered.",
            vec![
                ToolParam::required("doctype", "string"),
                ToolParam::optional("filters", "object"),
            ],
        );
        register_tool(&mut registry, schema, {
            let platform = platform.clone();
            move |inv| {
                with_doctype(inv, |doctype| {
                    let plan = filters_plan(inv)?;
                    let rows = platform
                        .lock()
                        .expect("platform lock")
                        .query_records(doctype, &plan, Some(&[]), None)?;
                    Ok(json!({ "doctype": doctype, "count": rows.len() }))
                })
            }
        })
        .expect("built-in names are unique");

        registry
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn schemas(&self) -> Vec<ToolSchema> {
        self.tools.iter().map(|t| t.schema.clone()).collect()
    }

    /// Dispatch by name. Unknown names return an error-envelope observation,
    /// matching how tool failures surface to the model.
    pub fn dispatch(&mut self, invocation: &ToolInvocation) -> String {
        match self
            .tools
            .iter_mut()
            .find(|t| t.schema.name == invocation.tool_name)
        {
            Some(tool) => (tool.handler)(invocation),
            None => error_envelope(&format!("no tool named {:?}", invocation.tool_name)),
        }
    }
}

/// [`Toolset`] wrapper so a registry can participate in hybrid episodes.
pub struct RegistryToolset {
    registry: ToolRegistry,
}

impl RegistryToolset {
    pub fn new(registry: ToolRegistry) -> Self {
        RegistryToolset { registry }
    }
}

impl Toolset for RegistryToolset {
    fn name(&self) -> &str {
        "registry"
    }

    fn schemas(&self) -> Vec<ToolSchema> {
        self.registry.schemas()
    }

    fn dispatch(&mut self, invocation: &ToolInvocation) -> DispatchResult {
        DispatchResult {
            observation: self.registry.dispatch(invocation),
            exec: None,
        }
    }
}

fn result_envelope(value: Value) -> String {
    json!({ "result": value }).to_string()
}

fn error_envelope(message: &str) -> String {
    json!({
        "error": { "message": message, "detail": Value::Null },
        "status": "failure"
    })
    .to_string()
}

fn bad_args(message: &str) -> PlatformError {
    // Argument mistakes ride the malformed-query error shape: both surface
    // to the model as error envelopes, so one channel is enough.
    PlatformError::Query(crate::platform::QueryError::MalformedToken {
        token: String::new(),
        reason: message.to_string(),
    })
}

fn with_doctype(
    invocation: &ToolInvocation,
    body: impl FnOnce(&str) -> Result<Value, PlatformError>,
) -> String {
    let Some(doctype) = invocation.str_arg("doctype") else {
        return error_envelope("missing required argument \"doctype\"");
    };
    match body(doctype) {
        Ok(value) => result_envelope(value),
        Err(err) => error_envelope(&err.to_string()),
    }
}

fn object_arg(invocation: &ToolInvocation, name: &str) -> Result<Map<String, Value>, PlatformError> {
    match invocation.arguments.get(name) {
        Some(Value::Object(map)) => Ok(map.clone()),
        Some(_) => Err(bad_args(&format!("argument {name:?} must be an object"))),
        None => Err(bad_args(&format!("missing required argument {name:?}"))),
    }
}

/// String coercion identical to the HTTP facade's body handling.
fn coerce_object(map: &Map<String, Value>) -> Record {
    map.iter()
        .map(|(key, value)| {
            let coerced = match value {
                Value::String(s) => s.clone(),
                Value::Null => String::new(),
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                nested => nested.to_string(),
            };
            (key.clone(), coerced)
        })
        .collect()
}

/// Build a query plan from `filters` (equality per key) or a raw `query`
/// string in the sysparm grammar; both present means both apply.
fn filters_plan(invocation: &ToolInvocation) -> Result<QueryPlan, PlatformError> {
    let mut plan = match invocation.str_arg("query") {
        Some(query) => parse_query(query)?,
        None => QueryPlan::default(),
    };
    if let Some(value) = invocation.arguments.get("filters") {
        let Value::Object(filters) = value else {
            return Err(bad_args("argument \"filters\" must be an object"));
        };
        for (field, expected) in coerce_object(filters) {
            plan.conjuncts.push(Predicate {
                field,
                op: QueryOp::Eq,
                value: expected,
            });
        }
    }
    Ok(plan)
}

fn get_documents(platform: &PlatformHandle, invocation: &ToolInvocation) -> String {
    with_doctype(invocation, |doctype| {
        let plan = filters_plan(invocation)?;
        let fields: Option<Vec<String>> = match invocation.arguments.get("fields") {
            Some(Value::Array(items)) => Some(
                items
                    .iter()
                    .filter_map(|item| item.as_str())
                    .map(str::to_string)
                    .collect(),
            ),
            Some(_) => return Err(bad_args("argument \"fields\" must be an array of strings")),
            None => None,
        };
        let limit = match invocation.arguments.get("limit") {
            Some(value) => match value.as_u64() {
                Some(n) => Some(n as usize),
                None => return Err(bad_args("argument \"limit\" must be a non-negative integer")),
            },
            None => None,
        };
        let rows = platform
            .lock()
            .expect("platform lock")
            .query_records(doctype, &plan, fields.as_deref(), limit)?;
        Ok(serde_json::to_value(rows).expect("records serialize"))
    })
}
