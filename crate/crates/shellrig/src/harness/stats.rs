//! Success-rate statistics, tool-call histograms, outcome breakdowns, and
//! dual-oracle aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::outcome::{OutcomeCategory, ALL_CATEGORIES};

/// Errors from statistics over malformed inputs.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("oracle vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Success rate and its binomial standard error.
///
/// `rate = successes/trials`, `se = sqrt(rate·(1−rate)/trials)`. Zero
/// trials yields NaN for both, so an empty arm can never masquerade as a
/// measured one.
pub fn success_rate_se(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (f64::NAN, f64::NAN);
    }
    let rate = successes as f64 / trials as f64;
    let se = (rate * (1.0 - rate) / trials as f64).sqrt();
    (rate, se)
}

/// Tool-call count distribution, split by task success, with every count at
/// or above `cap` folded into the final bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub cap: usize,
    /// `successes[i]` = number of successful tasks that used `i` calls
    /// (`cap` means "`cap` or more"). Length is `cap + 1`.
    pub successes: Vec<usize>,
    pub failures: Vec<usize>,
}

impl Histogram {
    /// Total tasks counted.
    pub fn total(&self) -> usize {
        self.successes.iter().sum::<usize>() + self.failures.iter().sum::<usize>()
    }
}

/// Build the tool-call histogram from `(tool_call_count, task_succeeded)`
/// pairs.
pub fn tool_call_histogram(outcomes: &[(usize, bool)], cap: usize) -> Histogram {
    let mut histogram = Histogram {
        cap,
        successes: vec![0; cap + 1],
        failures: vec![0; cap + 1],
    };
    for &(count, succeeded) in outcomes {
        let bin = count.min(cap);
        if succeeded {
            histogram.successes[bin] += 1;
        } else {
            histogram.failures[bin] += 1;
        }
    }
    histogram
}

/// Per-category fractions of all tool calls, split by task success cohort.
///
/// Within each cohort the fractions cover every call (denominator = all
/// calls made by tasks in that cohort), so they sum to 1 whenever the
/// cohort made any calls. Every category appears, zero or not, keeping
/// table layouts stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub success: BTreeMap<OutcomeCategory, f64>,
    pub failure: BTreeMap<OutcomeCategory, f64>,
    /// Call totals behind the fractions, success then failure cohort.
    pub call_totals: (usize, usize),
}

/// Compute the outcome breakdown from `(category, task_succeeded)` pairs,
/// one per dispatched tool call.
pub fn error_breakdown(calls: &[(OutcomeCategory, bool)]) -> ErrorBreakdown {
    let mut success_counts: BTreeMap<OutcomeCategory, usize> = BTreeMap::new();
    let mut failure_counts: BTreeMap<OutcomeCategory, usize> = BTreeMap::new();
    let (mut success_total, mut failure_total) = (0usize, 0usize);
    for &(category, succeeded) in calls {
        if succeeded {
            *success_counts.entry(category).or_insert(0) += 1;
            success_total += 1;
        } else {
            *failure_counts.entry(category).or_insert(0) += 1;
            failure_total += 1;
        }
    }
    let fractions = |counts: &BTreeMap<OutcomeCategory, usize>, total: usize| {
        ALL_CATEGORIES
            .iter()
            .map(|&category| {
                let count = counts.get(&category).copied().unwrap_or(0);
                let fraction = if total == 0 {
                    0.0
                } else {
                    count as f64 / total as f64
                };
                (category, fraction)
            })
            .collect()
    };
    ErrorBreakdown {
        success: fractions(&success_counts, success_total),
        failure: fractions(&failure_counts, failure_total),
        call_totals: (success_total, failure_total),
    }
}

/// Agreement summary of two per-task success oracles over the same tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionSummary {
    pub trials: usize,
    pub both: usize,
    pub only_a: usize,
    pub only_b: usize,
    pub neither: usize,
    pub rate_a: f64,
    pub rate_b: f64,
    /// Success under *either* oracle.
    pub rate_union: f64,
}

/// Combine two per-task oracle vectors (same tasks, same order) into union
/// statistics.
///
/// By construction `max(rate_a, rate_b) ≤ rate_union ≤ min(1, rate_a +
/// rate_b)`.
pub fn oracle_union(a: &[bool], b: &[bool]) -> Result<UnionSummary, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let trials = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0usize, 0, 0, 0);
    for (&pass_a, &pass_b) in a.iter().zip(b) {
        match (pass_a, pass_b) {
            (true, true) => both += 1,
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            (false, false) => neither += 1,
        }
    }
    let rate = |count: usize| {
        if trials == 0 {
            f64::NAN
        } else {
            count as f64 / trials as f64
        }
    };
    Ok(UnionSummary {
        trials,
        both,
        only_a,
        only_b,
        neither,
        rate_a: rate(both + only_a),
        rate_b: rate(both + only_b),
        rate_union: rate(both + only_a + only_b),
    })
}

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
