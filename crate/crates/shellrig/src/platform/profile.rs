//! Wire profiles: which vendor surface the mock presents.
//!
//! A profile fixes the environment variable names an agent sees, the auth
//! header the HTTP facade checks, and how deep links to records are built.

use std::collections::BTreeMap;

/// The vendor surface a fixture emulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    ServiceNow,
    Erpnext,
}

impl Profile {
    /// Look up a profile by the name used in fixture files.
    pub fn from_name(name: &str) -> Option<Profile> {
        match name {
            "servicenow" => Some(Profile::ServiceNow),
            "erpnext" => Some(Profile::Erpnext),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::ServiceNow => "servicenow",
            Profile::Erpnext => "erpnext",
        }
    }

    /// Environment variable holding the instance base URL.
    pub fn url_env_var(&self) -> &'static str {
        match self {
            Profile::ServiceNow => "SERVICENOW_INSTANCE_URL",
            Profile::Erpnext => "ERPNEXT_BASE_URL",
        }
    }

    /// Environment variable holding ready-to-splice curl auth flags.
    pub fn headers_env_var(&self) -> &'static str {
        match self {
            Profile::ServiceNow => "SERVICENOW_EXTRA_HTTP_HEADERS",
            Profile::Erpnext => "ERPNEXT_EXTRA_HTTP_HEADERS",
        }
    }

    /// Request header the facade authenticates on.
    pub fn auth_header(&self) -> &'static str {
        match self {
            Profile::ServiceNow => "x-sn-apikey",
            Profile::Erpnext => "Authorization",
        }
    }

    /// Expected value of the auth header.
    pub fn auth_token(&self) -> &'static str {
        match self {
            Profile::ServiceNow => "sn-mock-key-0001",
            Profile::Erpnext => "token mock-api-key:mock-api-secret",
        }
    }

    /// The value exported via [`headers_env_var`](Self::headers_env_var):
    /// curl flags that authenticate a request when expanded with `eval`.
    pub fn headers_bundle(&self) -> String {
        format!("-H \"{}: {}\"", self.auth_header(), self.auth_token())
    }

    /// Environment block an agent sandbox needs to reach an instance.
    pub fn env_for(&self, base_url: &str) -> BTreeMap<String, String> {
        let mut env = BTreeMap::new();
        env.insert(self.url_env_var().to_string(), base_url.to_string());
        env.insert(self.headers_env_var().to_string(), self.headers_bundle());
        env
    }

    /// Deep link to a record in the emulated UI.
    pub fn record_link(&self, base_url: &str, table: &str, record_id: &str) -> String {
        match self {
            Profile::ServiceNow => format!(
                "{base_url}/now/nav/ui/classic/params/target/{table}.do?sys_id={record_id}"
            ),
            Profile::Erpnext => format!("{base_url}/app/{table}/{record_id}"),
        }
    }
}
