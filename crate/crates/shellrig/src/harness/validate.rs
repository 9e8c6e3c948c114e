//! Declarative task validators: platform-state checks and final-answer
//! checks.
//!
//! A task succeeds when every one of its checks passes after the episode.
//! The same checks are evaluated *before* the episode against the freshly
//! reset platform and an empty final message, where they must all fail —
//! a check that passes with no agent work cannot certify anything.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::platform::{parse_query, PlatformError, PlatformState};

/// One pass/fail condition over the post-episode world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidatorCheck {
    /// At least one record of `table` matches `query`.
    RecordExists { table: String, query: String },
    /// No record of `table` matches `query`.
    RecordAbsent { table: String, query: String },
    /// At least one record matches `query`, and every match has
    /// `field == expected`.
    FieldEquals {
        table: String,
        query: String,
        field: String,
        expected: String,
    },
    /// Exactly `expected` records match `query`.
    CountEquals {
        table: String,
        query: String,
        expected: usize,
    },
    /// The normalized final message contains `expected` as a whole word.
    AnswerMatches { expected: String },
    /// The final message contains `expected` verbatim (for record links).
    UrlMatches { expected: String },
}

impl ValidatorCheck {
    pub fn kind(&self) -> &'static str {
        match self {
            ValidatorCheck::RecordExists { .. } => "record_exists",
            ValidatorCheck::RecordAbsent { .. } => "record_absent",
            ValidatorCheck::FieldEquals { .. } => "field_equals",
            ValidatorCheck::CountEquals { .. } => "count_equals",
            ValidatorCheck::AnswerMatches { .. } => "answer_matches",
            ValidatorCheck::UrlMatches { .. } => "url_matches",
        }
    }

    /// True for checks that read the platform state (the state oracle);
    /// false for checks that read the final message (the answer oracle).
    pub fn is_state_check(&self) -> bool {
        !matches!(
            self,
            ValidatorCheck::AnswerMatches { .. } | ValidatorCheck::UrlMatches { .. }
        )
    }
}

/// Lowercase, trim, and drop thousands separators (a comma directly between
/// digits), so `"1,234"` and `"1234"` compare equal.
pub fn normalize_answer(text: &str) -> String {
    let lower = text.to_lowercase();
    let trimmed = lower.trim();
    let chars: Vec<char> = trimmed.chars().collect();
    let mut out = String::with_capacity(trimmed.len());
    for (i, &c) in chars.iter().enumerate() {
        let separator = c == ','
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if !separator {
            out.push(c);
        }
    }
    out
}

/// Whole-word containment of the normalized expected answer in the
/// normalized message. An empty expectation never matches.
pub fn answer_matches(expected: &str, message: &str) -> bool {
    let needle = normalize_answer(expected);
    if needle.is_empty() {
        return false;
    }
    let haystack = normalize_answer(message);
    static CACHE: OnceLock<std::sync::Mutex<std::collections::HashMap<String, Regex>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut cache = cache.lock().expect("regex cache lock");
    let re = cache.entry(needle.clone()).or_insert_with(|| {
        Regex::new(&format!(r"(^|\W){}(\W|$)", regex::escape(&needle))).expect("escaped pattern")
    });
    re.is_match(&haystack)
}

/// Evaluate one check against the platform and the episode's final message.
///
/// An empty `query` matches every record of the table. Errors mean the
/// check itself is malformed (unknown table, bad query grammar) — a suite
/// authoring problem, not a task failure.
pub fn evaluate_check(
    check: &ValidatorCheck,
    state: &PlatformState,
    final_message: &str,
) -> Result<bool, PlatformError> {
    match check {
        ValidatorCheck::RecordExists { table, query } => Ok(!state
            .query_records(table, &parse_query(query)?, Some(&[]), Some(1))?
            .is_empty()),
        ValidatorCheck::RecordAbsent { table, query } => Ok(state
            .query_records(table, &parse_query(query)?, Some(&[]), Some(1))?
            .is_empty()),
        ValidatorCheck::FieldEquals {
            table,
            query,
            field,
            expected,
        } => {
            let rows = state.query_records(
                table,
                &parse_query(query)?,
                Some(std::slice::from_ref(field)),
                None,
            )?;
            Ok(!rows.is_empty()
                && rows
                    .iter()
                    .all(|row| row.get(field).map(String::as_str) == Some(expected.as_str())))
        }
        ValidatorCheck::CountEquals {
            table,
            query,
            expected,
        } => Ok(state
            .query_records(table, &parse_query(query)?, Some(&[]), None)?
            .len()
            == *expected),
        ValidatorCheck::AnswerMatches { expected } => Ok(answer_matches(expected, final_message)),
        ValidatorCheck::UrlMatches { expected } => {
            Ok(!expected.is_empty() && final_message.contains(expected))
        }
    }
}
