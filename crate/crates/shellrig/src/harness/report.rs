//! Render run summaries as markdown, and strip volatile fields so two runs
//! of the same suite can be compared byte for byte.

use serde_json::Value;

use super::outcome::ALL_CATEGORIES;
use super::RunSummary;
use crate::agent::AgentConfig;

/// Human-readable arm label: paradigm, features, orchestration.
/// `terminal+docs+skills/planner_executor` reads as "terminal paradigm with
/// docs and skills, run through the planner–executor split".
pub fn arm_label(config: &AgentConfig) -> String {
    let mut label = config.paradigm.name().to_string();
    for feature in &config.features {
        label.push('+');
        label.push_str(feature.name());
    }
    label.push('/');
    label.push_str(config.orchestration.name());
    label
}

/// Remove fields that legitimately differ between two otherwise identical
/// runs: wall-clock durations and timestamps. Recurses through objects and
/// arrays. Everything else in a report is deterministic for scripted runs.
pub fn strip_volatile(value: &mut Value) {
    const VOLATILE: [&str; 5] = [
        "wall_clock",
        "mean_wall_clock",
        "duration_secs",
        "started_at",
        "finished_at",
    ];
    match value {
        Value::Object(map) => {
            for key in VOLATILE {
                map.remove(key);
            }
            for child in map.values_mut() {
                strip_volatile(child);
            }
        }
        Value::Array(items) => {
            for child in items {
                strip_volatile(child);
            }
        }
        _ => {}
    }
}

fn pct(x: f64) -> String {
    if x.is_finite() {
        format!("{:.2}%", x * 100.0)
    } else {
        "n/a".to_string()
    }
}

fn pp(x: f64) -> String {
    if x.is_finite() {
        format!("{:.2}pp", x * 100.0)
    } else {
        "n/a".to_string()
    }
}

fn f2(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.2}")
    } else {
        "n/a".to_string()
    }
}

/// Render one or more arms as a markdown report.
///
/// The arms table puts the wall-clock column last so timing can be stripped
/// off for comparisons without touching any other cell. With several arms,
/// the best success rate and every rate within one of its own standard
/// errors of it are bold.
pub fn emit_report(arms: &[RunSummary]) -> String {
    let mut out = String::new();
    out.push_str("# Benchmark report\n\n");

    let suites: Vec<&str> = {
        let mut names: Vec<&str> = arms.iter().map(|arm| arm.suite.as_str()).collect();
        names.dedup();
        names
    };
    if let [only] = suites.as_slice() {
        out.push_str(&format!("Suite: `{only}`\n\n"));
    }

    out.push_str("## Arms\n\n");
    out.push_str(
        "| Arm | Tasks | Success rate | SE | Mean tool calls | Mean cost (USD) | Mean wall clock (s) |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|\n");
    let best_rate = arms
        .iter()
        .map(|arm| arm.success_rate)
        .filter(|rate| rate.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    for arm in arms {
        let tied_with_best = arms.len() > 1
            && arm.success_rate.is_finite()
            && arm.se.is_finite()
            && arm.success_rate >= best_rate - arm.se;
        let rate_cell = if tied_with_best {
            format!("**{}**", pct(arm.success_rate))
        } else {
            pct(arm.success_rate)
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            arm.arm,
            arm.trials,
            rate_cell,
            pp(arm.se),
            f2(arm.mean_tool_calls),
            arm.mean_cost.rounded_2dp(),
            f2(arm.mean_wall_clock),
        ));
    }
    out.push('\n');

    for arm in arms {
        out.push_str(&format!("## Tasks — {}\n\n", arm.arm));
        out.push_str("| Task | Result | Checks | Tool calls | Termination |\n");
        out.push_str("|---|---|---|---|---|\n");
        for task in &arm.tasks {
            let passed = task.checks.iter().filter(|check| check.passed).count();
            let mut termination = task.termination.name().to_string();
            if task.fallback {
                termination.push_str(" (fallback)");
            }
            out.push_str(&format!(
                "| {} | {} | {}/{} | {} | {} |\n",
                task.task_id,
                if task.success { "pass" } else { "fail" },
                passed,
                task.checks.len(),
                task.tool_call_count,
                termination,
            ));
        }
        out.push('\n');

        out.push_str(&format!("## Tool calls per task — {}\n\n", arm.arm));
        out.push_str("| Calls | Successes | Failures |\n");
        out.push_str("|---|---|---|\n");
        let hist = &arm.histogram;
        for bin in 0..=hist.cap {
            let (successes, failures) = (hist.successes[bin], hist.failures[bin]);
            if successes == 0 && failures == 0 {
                continue;
            }
            let label = if bin == hist.cap {
                format!("{bin}+")
            } else {
                bin.to_string()
            };
            out.push_str(&format!("| {label} | {successes} | {failures} |\n"));
        }
        out.push('\n');

        out.push_str(&format!("## Tool-call outcomes — {}\n\n", arm.arm));
        let (success_calls, failure_calls) = arm.breakdown.call_totals;
        out.push_str(&format!(
            "Calls from successful tasks: {success_calls}; from failed tasks: {failure_calls}.\n\n",
        ));
        out.push_str("| Outcome | Successful tasks | Failed tasks |\n");
        out.push_str("|---|---|---|\n");
        for category in ALL_CATEGORIES {
            let success_share = arm.breakdown.success.get(&category).copied().unwrap_or(0.0);
            let failure_share = arm.breakdown.failure.get(&category).copied().unwrap_or(0.0);
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                category.label(),
                pct(success_share),
                pct(failure_share),
            ));
        }
        out.push('\n');
    }
    out
}
