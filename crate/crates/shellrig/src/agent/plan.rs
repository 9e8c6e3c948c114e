//! Plan extraction from a planner's final message.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// An extracted plan: ordered steps plus the untouched planner output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<String>,
    pub raw: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("planner output contains no \"### Plan\" heading")]
    NoPlanHeading,
    #[error("\"### Plan\" heading is not followed by numbered steps")]
    EmptyPlan,
}

fn step_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d+[.)]\s*(.*)$").expect("valid regex"))
}

/// Parse the numbered items following the **last** `### Plan` heading.
/// Leading numerals are stripped; unnumbered lines between items are
/// ignored. A message with the heading but no numbered items is an error.
pub fn extract_plan(planner_final_message: &str) -> Result<Plan, PlanError> {
    let lines: Vec<&str> = planner_final_message.lines().collect();
    let heading = lines
        .iter()
        .rposition(|line| line.trim() == "### Plan")
        .ok_or(PlanError::NoPlanHeading)?;
    let steps: Vec<String> = lines[heading + 1..]
        .iter()
        .filter_map(|line| {
            step_pattern()
                .captures(line)
                .map(|c| c[1].trim().to_string())
        })
        .filter(|step| !step.is_empty())
        .collect();
    if steps.is_empty() {
        return Err(PlanError::EmptyPlan);
    }
    Ok(Plan {
        steps,
        raw: planner_final_message.to_string(),
    })
}

impl Plan {
    /// Render the steps as the numbered list the executor prompt embeds.
    pub fn render_steps(&self) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, step)| format!("{}. {step}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_items_after_the_heading() {
        let plan = extract_plan("I looked around.\n\n### Plan\n1. Query users\n2. Create record")
            .unwrap();
        assert_eq!(plan.steps, vec!["Query users", "Create record"]);
        assert!(plan.raw.starts_with("I looked around."));
    }

    #[test]
    fn missing_heading_is_an_error() {
        assert_eq!(
            extract_plan("1. Query users\n2. Create record").unwrap_err(),
            PlanError::NoPlanHeading
        );
    }

    #[test]
    fn heading_with_prose_but_no_items_is_empty() {
        assert_eq!(
            extract_plan("### Plan\nSorry, the task looks infeasible.").unwrap_err(),
            PlanError::EmptyPlan
        );
    }

    #[test]
    fn last_heading_wins() {
        let message = "### Plan\n1. Draft idea\n\nOn reflection, a better approach:\n\n### Plan\n1. Final step A\n2. Final step B";
        let plan = extract_plan(message).unwrap();
        assert_eq!(plan.steps, vec!["Final step A", "Final step B"]);
    }

    #[test]
    fn paren_numbering_and_blank_lines_are_tolerated() {
        let plan = extract_plan("### Plan\n\n1) First\n\nsome aside\n\n2) Second\n").unwrap();
        assert_eq!(plan.steps, vec!["First", "Second"]);
    }

    #[test]
    fn rendering_renumbers_sequentially() {
        let plan = extract_plan("### Plan\n3. Alpha\n7. Beta").unwrap();
        assert_eq!(plan.render_steps(), "1. Alpha\n2. Beta");
    }
}
