//! The eleven-label tool-call outcome taxonomy and its classifier.
//!
//! Outputs routinely match several surface patterns at once (a shell error
//! can mention curl; an error envelope is also valid JSON), so
//! classification applies one declared decision order rather than pattern
//! voting. The function is total: every (observation, exec) pair maps to
//! exactly one category.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::sandbox::{ExecResult, NO_OUTPUT, TRUNCATION_MARKER};

/// Category of a single tool call's result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
pub enum OutcomeCategory {
    #[serde(rename = "Success")]
    Success,
    #[serde(rename = "Success (trunc.)")]
    SuccessTruncated,
    #[serde(rename = "Non-JSON success")]
    NonJsonSuccess,
    #[serde(rename = "API error")]
    ApiError,
    #[serde(rename = "Shell error")]
    ShellError,
    #[serde(rename = "Empty response")]
    EmptyResponse,
    #[serde(rename = "Curl error")]
    CurlError,
    #[serde(rename = "JSON parse error")]
    JsonParseError,
    #[serde(rename = "Python error")]
    PythonError,
    #[serde(rename = "Timeout")]
    Timeout,
    #[serde(rename = "HTML redirect")]
    HtmlRedirect,
}

/// Every category, in presentation order.
pub const ALL_CATEGORIES: [OutcomeCategory; 11] = [
    OutcomeCategory::Success,
    OutcomeCategory::SuccessTruncated,
    OutcomeCategory::NonJsonSuccess,
    OutcomeCategory::ApiError,
    OutcomeCategory::ShellError,
    OutcomeCategory::EmptyResponse,
    OutcomeCategory::CurlError,
    OutcomeCategory::JsonParseError,
    OutcomeCategory::PythonError,
    OutcomeCategory::Timeout,
    OutcomeCategory::HtmlRedirect,
];

impl OutcomeCategory {
    pub fn label(&self) -> &'static str {
        match self {
            OutcomeCategory::Success => "Success",
            OutcomeCategory::SuccessTruncated => "Success (trunc.)",
            OutcomeCategory::NonJsonSuccess => "Non-JSON success",
            OutcomeCategory::ApiError => "API error",
            OutcomeCategory::ShellError => "Shell error",
            OutcomeCategory::EmptyResponse => "Empty response",
            OutcomeCategory::CurlError => "Curl error",
            OutcomeCategory::JsonParseError => "JSON parse error",
            OutcomeCategory::PythonError => "Python error",
            OutcomeCategory::Timeout => "Timeout",
            OutcomeCategory::HtmlRedirect => "HTML redirect",
        }
    }

    /// True for the three success-shaped categories.
    pub fn is_success_shaped(&self) -> bool {
        matches!(
            self,
            OutcomeCategory::Success
                | OutcomeCategory::SuccessTruncated
                | OutcomeCategory::NonJsonSuccess
        )
    }
}

impl std::fmt::Display for OutcomeCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

fn shell_diag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?m)(^|[\s])(/bin/)?(ba)?sh:\s|command not found|(?i:syntax error)")
            .expect("valid regex")
    })
}

fn curl_diag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"curl: \(\d+\)").expect("valid regex"))
}

fn meta_refresh() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?i)<meta\s+http-equiv=["']?refresh"#).expect("valid regex"))
}

fn python_diag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*\w+(\.\w+)*(Error|Exception): ").expect("valid regex"))
}

/// Classify one tool call's result.
///
/// `exec` carries the exit/timeout flags for terminal calls; registry calls
/// pass `None` and are treated as cleanly exited output. The decision order
/// is fixed: Timeout → Shell error → Curl error → HTML redirect → API error
/// → JSON parse error → Python error → Empty response → Success (trunc.) →
/// Success → Non-JSON success, with nonzero-exit leftovers folding into
/// Shell error so the function stays total.
pub fn classify_outcome(observation: &str, exec: Option<&ExecResult>) -> OutcomeCategory {
    let (exit_code, timed_out) = exec
        .map(|e| (e.exit_code, e.timed_out))
        .unwrap_or((0, false));
    let trimmed = observation.trim();

    if timed_out || observation.contains("[error] Command timed out after") {
        return OutcomeCategory::Timeout;
    }
    if exit_code != 0 && shell_diag().is_match(observation) {
        return OutcomeCategory::ShellError;
    }
    if curl_diag().is_match(observation) {
        return OutcomeCategory::CurlError;
    }
    if observation.to_lowercase().contains("<html") && meta_refresh().is_match(observation) {
        return OutcomeCategory::HtmlRedirect;
    }
    if let Ok(serde_json::Value::Object(body)) = serde_json::from_str(trimmed) {
        if body.contains_key("error") {
            return OutcomeCategory::ApiError;
        }
    }
    if observation.contains("parse error:") {
        return OutcomeCategory::JsonParseError;
    }
    if observation.contains("Traceback (most recent call last)")
        || observation.contains("JSONDecodeError")
        || python_diag().is_match(observation)
    {
        return OutcomeCategory::PythonError;
    }
    if exit_code == 0 && (trimmed.is_empty() || trimmed == NO_OUTPUT) {
        return OutcomeCategory::EmptyResponse;
    }
    if exit_code == 0
        && trimmed.ends_with(TRUNCATION_MARKER)
        && (trimmed.starts_with('{') || trimmed.starts_with('['))
    {
        return OutcomeCategory::SuccessTruncated;
    }
    if exit_code == 0 {
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(trimmed) {
            if value.is_object() || value.is_array() {
                return OutcomeCategory::Success;
            }
        }
        return OutcomeCategory::NonJsonSuccess;
    }
    OutcomeCategory::ShellError
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(exit_code: i32, timed_out: bool) -> ExecResult {
        ExecResult {
            stdout: String::new(),
            stderr: String::new(),
            exit_code,
            duration_secs: 0.0,
            truncated: false,
            timed_out,
        }
    }

    #[test]
    fn decision_order_beats_pattern_overlap() {
        // A shell error that mentions curl is a shell error, not a curl error.
        let obs = "/bin/sh: curl: command not found";
        assert_eq!(
            classify_outcome(obs, Some(&exec(127, false))),
            OutcomeCategory::ShellError
        );
        // The same text with a clean exit cannot be a shell error.
        assert_eq!(
            classify_outcome("docs say: command not found means PATH issues", Some(&exec(0, false))),
            OutcomeCategory::NonJsonSuccess
        );
    }

    #[test]
    fn timeout_wins_over_everything() {
        let obs = "curl: (28) timed out\n[error] Command timed out after 30s.";
        assert_eq!(
            classify_outcome(obs, Some(&exec(124, true))),
            OutcomeCategory::Timeout
        );
        // The flag alone is enough.
        assert_eq!(
            classify_outcome("partial output", Some(&exec(124, true))),
            OutcomeCategory::Timeout
        );
    }

    #[test]
    fn registry_observations_classify_without_exec() {
        assert_eq!(
            classify_outcome(r#"{"result": []}"#, None),
            OutcomeCategory::Success
        );
        assert_eq!(
            classify_outcome(
                r#"{"error": {"message": "unknown table \"x\"", "detail": null}, "status": "failure"}"#,
                None
            ),
            OutcomeCategory::ApiError
        );
    }

    #[test]
    fn scalar_json_is_non_json_success() {
        // `... | jq length` style outputs: numerically valid JSON, but not a
        // structured response body.
        assert_eq!(
            classify_outcome("3", Some(&exec(0, false))),
            OutcomeCategory::NonJsonSuccess
        );
    }

    #[test]
    fn truncated_structured_output() {
        let obs = format!(r#"[{{"sys_id": "a"}}, {{"sys_id": "b"}} {TRUNCATION_MARKER}"#);
        assert_eq!(
            classify_outcome(&obs, Some(&exec(0, false))),
            OutcomeCategory::SuccessTruncated
        );
    }

    #[test]
    fn nonzero_exit_with_no_pattern_folds_into_shell_error() {
        assert_eq!(
            classify_outcome("something odd happened\n[exit code: 3]", Some(&exec(3, false))),
            OutcomeCategory::ShellError
        );
    }

    #[test]
    fn ssh_errors_are_not_shell_errors() {
        assert_eq!(
            classify_outcome("ssh: connect to host x port 22: Connection refused", Some(&exec(255, false))),
            OutcomeCategory::ShellError, // via the total-function fallback…
        );
        // …but the diagnostic regex itself must not fire on "ssh:".
        assert!(!shell_diag().is_match("ssh: connect to host x port 22"));
    }

    #[test]
    fn empty_needs_a_clean_exit() {
        assert_eq!(
            classify_outcome(NO_OUTPUT, Some(&exec(0, false))),
            OutcomeCategory::EmptyResponse
        );
        assert_eq!(
            classify_outcome("", None),
            OutcomeCategory::EmptyResponse
        );
        assert_eq!(
            classify_outcome(&format!("{NO_OUTPUT}\n[exit code: 1]"), Some(&exec(1, false))),
            OutcomeCategory::ShellError
        );
    }

    #[test]
    fn labels_are_verbatim() {
        let labels: Vec<&str> = ALL_CATEGORIES.iter().map(|c| c.label()).collect();
        assert_eq!(
            labels,
            vec![
                "Success",
                "Success (trunc.)",
                "Non-JSON success",
                "API error",
                "Shell error",
                "Empty response",
                "Curl error",
                "JSON parse error",
                "Python error",
                "Timeout",
                "HTML redirect",
            ]
        );
    }

    #[test]
    fn serde_round_trips_the_labels() {
        for category in ALL_CATEGORIES {
            let json = serde_json::to_string(&category).unwrap();
            assert_eq!(json, format!("{:?}", category.label()));
            let back: OutcomeCategory = serde_json::from_str(&json).unwrap();
            assert_eq!(back, category);
        }
    }
}
