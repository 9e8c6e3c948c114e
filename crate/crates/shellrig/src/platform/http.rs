//! HTTP facade over [`PlatformState`](crate::platform::PlatformState).
//!
//! [`handle_request`] is a pure function from request to reply so routing
//! and envelopes are testable without sockets; [`PlatformServer`] binds it
//! to a real port via `tiny_http`.
//!
//! Routes (all under the authenticated surface except `/health`):
//!
//! * `GET /health` — liveness plus fixture name and state digest
//! * `GET|POST /api/now/table/{table}` — query records / create a record
//! * `GET|PATCH|PUT|DELETE /api/now/table/{table}/{sys_id}` — single record
//! * `GET /api/resource/DocType` — list table names
//! * `GET /api/resource/DocType/{table}` — table schema
//! * `/api/resource/{table}[/{sys_id}]` — aliases of the `/api/now/table`
//!   routes with the same verbs (PUT is the conventional update here)
//!
//! Success envelopes are `{"result": ...}`; failures are
//! `{"error": {"message", "detail"}, "status": "failure"}`. Requests that
//! fail the auth check get a login-redirect HTML page with status 200 —
//! faithfully annoying, exactly like the real thing.

use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::{json, Value};

use super::{
    parse_query, PlatformError, PlatformHandle, PlatformState, Profile, Record,
};

/// A transport-independent request.
#[derive(Debug, Clone, Default)]
pub struct HttpRequest {
    /// Upper-case method name.
    pub method: String,
    /// Path plus optional query string, e.g. `/api/now/table/incident?x=1`.
    pub target: String,
    /// Header name/value pairs; names are matched case-insensitively.
    pub headers: Vec<(String, String)>,
    pub body: String,
}

/// A transport-independent reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub content_type: String,
    pub body: String,
}

/// The login-redirect page served to unauthenticated API requests.
pub const AUTH_REDIRECT_HTML: &str = "<html><head><meta http-equiv=\"refresh\" \
content=\"0; URL=/login.do\"/></head><body>Redirecting to login...</body></html>";

fn json_reply(status: u16, value: Value) -> HttpReply {
    HttpReply {
        status,
        content_type: "application/json".to_string(),
        body: value.to_string(),
    }
}

fn result_reply(status: u16, value: Value) -> HttpReply {
    json_reply(status, json!({ "result": value }))
}

fn error_reply(status: u16, message: &str, detail: Option<&str>) -> HttpReply {
    json_reply(
        status,
        json!({
            "error": { "message": message, "detail": detail },
            "status": "failure"
        }),
    )
}

fn auth_redirect() -> HttpReply {
    HttpReply {
        status: 200,
        content_type: "text/html".to_string(),
        body: AUTH_REDIRECT_HTML.to_string(),
    }
}

fn method_not_allowed(method: &str) -> HttpReply {
    error_reply(405, "Method not allowed", Some(method))
}

fn platform_error_reply(err: PlatformError) -> HttpReply {
    match err {
        PlatformError::UnknownTable(table) => {
            error_reply(404, &format!("Invalid table {table}"), None)
        }
        PlatformError::UnknownRecord => error_reply(
            404,
            "No Record found",
            Some("Record doesn't exist or ACL restricts the record retrieval"),
        ),
        PlatformError::UnknownOrderField(field) => error_reply(
            400,
            "Invalid query",
            Some(&format!("unknown order field {field:?}")),
        ),
        PlatformError::Query(err) => error_reply(400, "Invalid query", Some(&err.to_string())),
    }
}

/// Route one request against the state. Pure: no sockets, no global state.
pub fn handle_request(state: &mut PlatformState, request: &HttpRequest) -> HttpReply {
    let (path, raw_query) = match request.target.split_once('?') {
        Some((path, query)) => (path, query),
        None => (request.target.as_str(), ""),
    };
    let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    let params = parse_query_string(raw_query);

    if segments == ["health"] {
        return if request.method == "GET" {
            result_reply(
                200,
                json!({
                    "status": "ok",
                    "fixture": state.fixture_name(),
                    "digest": state.state_digest(),
                }),
            )
        } else {
            method_not_allowed(&request.method)
        };
    }

    let profile = Profile::from_name(state.profile()).unwrap_or(Profile::ServiceNow);
    if !is_authenticated(request, profile) {
        return auth_redirect();
    }

    match segments.as_slice() {
        ["api", "now", "table", table] => collection_route(state, table, request, &params),
        ["api", "now", "table", table, sys_id] => record_route(state, table, sys_id, request),
        ["api", "resource", "DocType"] => {
            if request.method != "GET" {
                return method_not_allowed(&request.method);
            }
            let names: Vec<Value> = state
                .table_names()
                .into_iter()
                .map(|name| json!({ "name": name }))
                .collect();
            result_reply(200, Value::Array(names))
        }
        ["api", "resource", "DocType", table] => {
            if request.method != "GET" {
                return method_not_allowed(&request.method);
            }
            match state.schema(table) {
                Ok(schema) => {
                    let fields: Vec<Value> = schema
                        .iter()
                        .map(|field| {
                            json!({
                                "name": field.name,
                                "label": field.label,
                                "type": field.field_type,
                            })
                        })
                        .collect();
                    result_reply(200, json!({ "name": table, "fields": fields }))
                }
                Err(err) => platform_error_reply(err),
            }
        }
        ["api", "resource", table] => collection_route(state, table, request, &params),
        ["api", "resource", table, sys_id] => record_route(state, table, sys_id, request),
        _ => error_reply(
            404,
            "Requested URI does not represent any resource",
            Some(path),
        ),
    }
}

fn collection_route(
    state: &mut PlatformState,
    table: &str,
    request: &HttpRequest,
    params: &[(String, String)],
) -> HttpReply {
    match request.method.as_str() {
        "GET" => {
            let plan = match parse_query(param(params, "sysparm_query").unwrap_or("")) {
                Ok(plan) => plan,
                Err(err) => return platform_error_reply(err.into()),
            };
            let fields: Option<Vec<String>> = param(params, "sysparm_fields").map(|spec| {
                spec.split(',')
                    .filter(|name| !name.is_empty())
                    .map(str::to_string)
                    .collect()
            });
            let limit = match param(params, "sysparm_limit") {
                None => None,
                Some(raw) => match raw.parse::<usize>() {
                    Ok(n) => Some(n),
                    Err(_) => {
                        return error_reply(
                            400,
                            "Invalid query",
                            Some("sysparm_limit must be a non-negative integer"),
                        )
                    }
                },
            };
            match state.query_records(table, &plan, fields.as_deref(), limit) {
                Ok(records) => result_reply(200, serde_json::to_value(records).unwrap()),
                Err(err) => platform_error_reply(err),
            }
        }
        "POST" => match parse_body(&request.body) {
            Ok(values) => match state.create_record(table, &values) {
                Ok(record) => result_reply(201, serde_json::to_value(record).unwrap()),
                Err(err) => platform_error_reply(err),
            },
            Err(reply) => reply,
        },
        method => method_not_allowed(method),
    }
}

fn record_route(
    state: &mut PlatformState,
    table: &str,
    sys_id: &str,
    request: &HttpRequest,
) -> HttpReply {
    match request.method.as_str() {
        "GET" => match state.get_record(table, sys_id) {
            Ok(record) => result_reply(200, serde_json::to_value(record).unwrap()),
            Err(err) => platform_error_reply(err),
        },
        "PATCH" | "PUT" => match parse_body(&request.body) {
            Ok(values) => match state.update_record(table, sys_id, &values) {
                Ok(record) => result_reply(200, serde_json::to_value(record).unwrap()),
                Err(err) => platform_error_reply(err),
            },
            Err(reply) => reply,
        },
        "DELETE" => match state.delete_record(table, sys_id) {
            Ok(()) => result_reply(200, Value::Null),
            Err(err) => platform_error_reply(err),
        },
        method => method_not_allowed(method),
    }
}

/// Parse a write body: must be a JSON object; values are coerced to strings
/// (numbers and booleans via their literal form, `null` to empty, nested
/// structures to compact JSON).
fn parse_body(body: &str) -> Result<Record, HttpReply> {
    let value: Value = serde_json::from_str(body).map_err(|_| {
        error_reply(
            400,
            "Exception while reading request",
            Some("The payload is not valid JSON."),
        )
    })?;
    let object = value.as_object().ok_or_else(|| {
        error_reply(
            400,
            "Exception while reading request",
            Some("The payload must be a JSON object."),
        )
    })?;
    let mut record = Record::new();
    for (key, value) in object {
        let coerced = match value {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            nested => nested.to_string(),
        };
        record.insert(key.clone(), coerced);
    }
    Ok(record)
}

fn is_authenticated(request: &HttpRequest, profile: Profile) -> bool {
    let wanted = profile.auth_header();
    request.headers.iter().any(|(name, value)| {
        name.eq_ignore_ascii_case(wanted) && value == profile.auth_token()
    })
}

fn param<'a>(params: &'a [(String, String)], name: &str) -> Option<&'a str> {
    params
        .iter()
        .find(|(key, _)| key == name)
        .map(|(_, value)| value.as_str())
}

fn parse_query_string(raw: &str) -> Vec<(String, String)> {
    raw.split('&')
        .filter(|pair| !pair.is_empty())
        .map(|pair| {
            let (key, value) = pair.split_once('=').unwrap_or((pair, ""));
            (percent_decode(key), percent_decode(value))
        })
        .collect()
}

fn percent_decode(input: &str) -> String {
    let bytes = input.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => {
                out.push(b' ');
                i += 1;
            }
            b'%' if i + 2 < bytes.len() => {
                let hi = (bytes[i + 1] as char).to_digit(16);
                let lo = (bytes[i + 2] as char).to_digit(16);
                match (hi, lo) {
                    (Some(hi), Some(lo)) => {
                        out.push((hi * 16 + lo) as u8);
                        i += 3;
                    }
                    _ => {
                        out.push(b'%');
                        i += 1;
                    }
                }
            }
            other => {
                out.push(other);
                i += 1;
            }
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// A background HTTP server bound to `127.0.0.1`; dropping it shuts the
/// listener down and joins the worker thread.
pub struct PlatformServer {
    server: Arc<tiny_http::Server>,
    handle: PlatformHandle,
    port: u16,
    worker: Option<JoinHandle<()>>,
}

impl PlatformServer {
    /// Bind `127.0.0.1:port` (0 picks an ephemeral port) and serve requests
    /// against the shared state.
    pub fn start(handle: PlatformHandle, port: u16) -> std::io::Result<PlatformServer> {
        let server = tiny_http::Server::http(("127.0.0.1", port))
            .map_err(std::io::Error::other)?;
        let port = match server.server_addr() {
            tiny_http::ListenAddr::IP(addr) => addr.port(),
            #[allow(unreachable_patterns)]
            _ => 0,
        };
        let server = Arc::new(server);
        let worker_server = Arc::clone(&server);
        let worker_handle = handle.clone();
        let worker = std::thread::spawn(move || {
            for mut request in worker_server.incoming_requests() {
                let mut body = String::new();
                let _ = request.as_reader().read_to_string(&mut body);
                let http_request = HttpRequest {
                    method: request.method().to_string().to_uppercase(),
                    target: request.url().to_string(),
                    headers: request
                        .headers()
                        .iter()
                        .map(|h| (h.field.to_string(), h.value.to_string()))
                        .collect(),
                    body,
                };
                let reply = {
                    let mut state = worker_handle.lock().expect("platform lock");
                    handle_request(&mut state, &http_request)
                };
                let content_type = tiny_http::Header::from_bytes(
                    &b"Content-Type"[..],
                    reply.content_type.as_bytes(),
                )
                .expect("static header name");
                let response = tiny_http::Response::from_string(reply.body)
                    .with_status_code(reply.status)
                    .with_header(content_type);
                let _ = request.respond(response);
            }
        });
        Ok(PlatformServer {
            server,
            handle,
            port,
            worker: Some(worker),
        })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    /// The shared state this server fronts.
    pub fn handle(&self) -> PlatformHandle {
        self.handle.clone()
    }
}

impl Drop for PlatformServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{shared, Fixture, PlatformState, SYS_ID_FIELD};
    use super::*;

    fn fixture() -> Fixture {
        Fixture::from_json(
            &serde_json::json!({
                "name": "demo",
                "profile": "servicenow",
                "tables": {
                    "incident": {
                        "schema": [
                            {"name": "number", "label": "Number", "type": "string"},
                            {"name": "short_description", "label": "Short description", "type": "string"},
                            {"name": "state", "label": "State", "type": "number"}
                        ],
                        "records": [
                            {"number": "INC0001", "short_description": "Printer jam", "state": "1"},
                            {"number": "INC0002", "short_description": "VPN drops", "state": "2"}
                        ]
                    }
                }
            })
            .to_string(),
        )
        .unwrap()
    }

    fn state() -> PlatformState {
        PlatformState::seed(&fixture())
    }

    fn request(method: &str, target: &str, body: &str) -> HttpRequest {
        HttpRequest {
            method: method.to_string(),
            target: target.to_string(),
            headers: vec![(
                "X-SN-ApiKey".to_string(),
                Profile::ServiceNow.auth_token().to_string(),
            )],
            body: body.to_string(),
        }
    }

    fn body_json(reply: &HttpReply) -> Value {
        serde_json::from_str(&reply.body).expect("reply body is JSON")
    }

    #[test]
    fn health_needs_no_auth() {
        let mut state = state();
        let reply = handle_request(
            &mut state,
            &HttpRequest {
                method: "GET".into(),
                target: "/health".into(),
                ..HttpRequest::default()
            },
        );
        assert_eq!(reply.status, 200);
        let body = body_json(&reply);
        assert_eq!(body["result"]["status"], "ok");
        assert_eq!(body["result"]["fixture"], "demo");
        assert_eq!(body["result"]["digest"], state.state_digest().as_str());
    }

    #[test]
    fn missing_auth_gets_the_login_redirect_page() {
        let mut state = state();
        let mut unauthed = request("GET", "/api/now/table/incident", "");
        unauthed.headers.clear();
        let reply = handle_request(&mut state, &unauthed);
        assert_eq!(reply.status, 200);
        assert_eq!(reply.content_type, "text/html");
        assert!(reply.body.contains("<html"));
        assert!(reply.body.contains("meta http-equiv=\"refresh\""));

        let mut wrong_token = request("GET", "/api/now/table/incident", "");
        wrong_token.headers = vec![("x-sn-apikey".into(), "nope".into())];
        assert_eq!(handle_request(&mut state, &wrong_token).body, reply.body);
    }

    #[test]
    fn list_supports_query_fields_and_limit() {
        let mut state = state();
        let reply = handle_request(
            &mut state,
            &request(
                "GET",
                "/api/now/table/incident?sysparm_query=state%3D1&sysparm_fields=number,short_description",
                "",
            ),
        );
        assert_eq!(reply.status, 200);
        let rows = body_json(&reply)["result"].as_array().unwrap().clone();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["number"], "INC0001");
        assert_eq!(rows[0]["short_description"], "Printer jam");
        assert!(rows[0].get(SYS_ID_FIELD).is_some());
        assert!(rows[0].get("state").is_none());

        let reply = handle_request(
            &mut state,
            &request("GET", "/api/now/table/incident?sysparm_limit=1", ""),
        );
        assert_eq!(body_json(&reply)["result"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn plus_decodes_to_space_in_queries() {
        let mut state = state();
        let reply = handle_request(
            &mut state,
            &request(
                "GET",
                "/api/now/table/incident?sysparm_query=short_descriptionLIKEprinter+jam",
                "",
            ),
        );
        assert_eq!(body_json(&reply)["result"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn create_returns_201_and_coerces_value_types() {
        let mut state = state();
        let reply = handle_request(
            &mut state,
            &request(
                "POST",
                "/api/now/table/incident",
                r#"{"number":"INC0042","state":4,"short_description":null,"extra":{"a":1}}"#,
            ),
        );
        assert_eq!(reply.status, 201);
        let record = body_json(&reply)["result"].clone();
        assert_eq!(record["number"], "INC0042");
        assert_eq!(record["state"], "4");
        assert_eq!(record["short_description"], "");
        // "extra" is not in the schema and is dropped silently.
        assert!(record.get("extra").is_none());
        assert_eq!(record[SYS_ID_FIELD].as_str().unwrap().len(), 32);
    }

    #[test]
    fn invalid_json_body_is_a_400_with_the_canonical_detail() {
        let mut state = state();
        let reply = handle_request(&mut state, &request("POST", "/api/now/table/incident", "{oops"));
        assert_eq!(reply.status, 400);
        let body = body_json(&reply);
        assert_eq!(body["error"]["detail"], "The payload is not valid JSON.");
        assert_eq!(body["status"], "failure");

        let reply = handle_request(&mut state, &request("POST", "/api/now/table/incident", "[1]"));
        assert_eq!(
            body_json(&reply)["error"]["detail"],
            "The payload must be a JSON object."
        );
    }

    #[test]
    fn get_patch_delete_one_record() {
        let mut state = state();
        let sys_id = state
            .query_records("incident", &Default::default(), None, Some(1))
            .unwrap()[0][SYS_ID_FIELD]
            .clone();
        let base = format!("/api/now/table/incident/{sys_id}");

        let reply = handle_request(&mut state, &request("GET", &base, ""));
        assert_eq!(body_json(&reply)["result"]["number"], "INC0001");

        let reply = handle_request(&mut state, &request("PATCH", &base, r#"{"state":"6"}"#));
        assert_eq!(reply.status, 200);
        assert_eq!(body_json(&reply)["result"]["state"], "6");

        let reply = handle_request(&mut state, &request("DELETE", &base, ""));
        assert_eq!(reply.status, 200);
        assert_eq!(body_json(&reply)["result"], Value::Null);

        let reply = handle_request(&mut state, &request("GET", &base, ""));
        assert_eq!(reply.status, 404);
        let body = body_json(&reply);
        assert_eq!(body["error"]["message"], "No Record found");
        assert_eq!(
            body["error"]["detail"],
            "Record doesn't exist or ACL restricts the record retrieval"
        );
    }

    #[test]
    fn unknown_table_and_unknown_route() {
        let mut state = state();
        let reply = handle_request(&mut state, &request("GET", "/api/now/table/nope", ""));
        assert_eq!(reply.status, 404);
        assert_eq!(body_json(&reply)["error"]["message"], "Invalid table nope");

        let reply = handle_request(&mut state, &request("GET", "/api/v2/whatever", ""));
        assert_eq!(reply.status, 404);
        assert_eq!(
            body_json(&reply)["error"]["message"],
            "Requested URI does not represent any resource"
        );
    }

    #[test]
    fn disjunction_is_rejected_with_a_clear_message() {
        let mut state = state();
        let reply = handle_request(
            &mut state,
            &request("GET", "/api/now/table/incident?sysparm_query=a%3D1%5EORb%3D2", ""),
        );
        assert_eq!(reply.status, 400);
        assert!(body_json(&reply)["error"]["detail"]
            .as_str()
            .unwrap()
            .contains("^OR disjunction is not supported"));
    }

    #[test]
    fn method_not_allowed_on_known_routes() {
        let mut state = state();
        let reply = handle_request(&mut state, &request("DELETE", "/api/now/table/incident", ""));
        assert_eq!(reply.status, 405);
        let reply = handle_request(&mut state, &request("POST", "/health", ""));
        assert_eq!(reply.status, 405);
    }

    #[test]
    fn doctype_routes_list_tables_and_schemas() {
        let mut state = state();
        let reply = handle_request(&mut state, &request("GET", "/api/resource/DocType", ""));
        let names = body_json(&reply)["result"].as_array().unwrap().clone();
        assert_eq!(names, vec![serde_json::json!({"name": "incident"})]);

        let reply = handle_request(&mut state, &request("GET", "/api/resource/DocType/incident", ""));
        let schema = body_json(&reply)["result"].clone();
        assert_eq!(schema["name"], "incident");
        let fields = schema["fields"].as_array().unwrap();
        assert_eq!(fields[0]["name"], "number");
        assert_eq!(fields[0]["type"], "string");
        // Bookkeeping fields appear at the end of every schema.
        assert_eq!(fields[fields.len() - 2]["name"], SYS_ID_FIELD);
    }

    #[test]
    fn resource_routes_alias_table_routes_with_put_update() {
        let mut state = state();
        let reply = handle_request(&mut state, &request("GET", "/api/resource/incident", ""));
        assert_eq!(body_json(&reply)["result"].as_array().unwrap().len(), 2);

        let sys_id = state
            .query_records("incident", &Default::default(), None, Some(1))
            .unwrap()[0][SYS_ID_FIELD]
            .clone();
        let reply = handle_request(
            &mut state,
            &request("PUT", &format!("/api/resource/incident/{sys_id}"), r#"{"state":"9"}"#),
        );
        assert_eq!(reply.status, 200);
        assert_eq!(body_json(&reply)["result"]["state"], "9");
    }

    #[test]
    fn server_round_trips_over_real_sockets() {
        let handle = shared(state());
        let server = PlatformServer::start(handle.clone(), 0).unwrap();
        let base = server.base_url();
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .http_status_as_error(false)
                .build(),
        );

        let mut health = agent.get(format!("{base}/health")).call().unwrap();
        let text = health.body_mut().read_to_string().unwrap();
        assert!(text.contains("\"status\":\"ok\""));

        let mut created = agent
            .post(format!("{base}/api/now/table/incident"))
            .header("x-sn-apikey", Profile::ServiceNow.auth_token())
            .send(r#"{"number":"INC0100"}"#)
            .unwrap();
        assert_eq!(created.status(), 201);
        let body: Value =
            serde_json::from_str(&created.body_mut().read_to_string().unwrap()).unwrap();
        let sys_id = body["result"][SYS_ID_FIELD].as_str().unwrap().to_string();

        let record = handle.lock().unwrap().get_record("incident", &sys_id).unwrap();
        assert_eq!(record["number"], "INC0100");
        drop(server);
    }
}
