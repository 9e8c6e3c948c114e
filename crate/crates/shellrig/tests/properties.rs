//! Property tests for the crate's structural invariants: grammar round-trips,
//! output-limit bounds, exact-arithmetic laws, share and breakdown
//! normalization, episode-termination totality, and report determinism.

use std::collections::BTreeMap;

use proptest::prelude::*;

use shellrig::agent::{run_single_agent, AgentConfig, EpisodeSetup, TerminationReason};
use shellrig::harness::{
    error_breakdown, normalize_answer, strip_volatile, tool_call_histogram, OutcomeCategory,
    ALL_CATEGORIES,
};
use shellrig::platform::{
    parse_query, render_query, shared, Direction, Fixture, OrderClause, PlatformState, Predicate,
    Profile, QueryOp, QueryPlan,
};
use shellrig::provider::{
    compute_cost, make_scripted, Cost, ExhaustionPolicy, ModelTurn, PricingTable, TokenUsage,
    ToolInvocation, TurnScript,
};
use shellrig::sandbox::{ExecLimits, Sandbox, SandboxPolicy, TRUNCATION_MARKER};

// ---------------------------------------------------------------------------
// Query grammar
// ---------------------------------------------------------------------------

/// Identifiers and values that cannot collide with the grammar's operators:
/// lowercase-only text never contains `LIKE`, `ORDERBY`, `^`, `=`, or `!`.
fn field_strategy() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,7}"
}

fn value_strategy() -> impl Strategy<Value = String> {
    "[a-z0-9 ._-]{0,12}"
}

fn predicate_strategy() -> impl Strategy<Value = Predicate> {
    (
        field_strategy(),
        prop_oneof![Just(QueryOp::Eq), Just(QueryOp::Neq), Just(QueryOp::Like)],
        value_strategy(),
    )
        .prop_map(|(field, op, value)| Predicate { field, op, value })
}

fn plan_strategy() -> impl Strategy<Value = QueryPlan> {
    (
        proptest::collection::vec(predicate_strategy(), 0..5),
        proptest::option::of((
            field_strategy(),
            prop_oneof![Just(Direction::Asc), Just(Direction::Desc)],
        )),
    )
        .prop_map(|(conjuncts, order)| QueryPlan {
            conjuncts,
            order: order.map(|(field, direction)| OrderClause { field, direction }),
        })
}

proptest! {
    /// Rendering a plan and parsing it back is the identity.
    #[test]
    fn query_render_parse_round_trip(plan in plan_strategy()) {
        let rendered = render_query(&plan);
        let parsed = parse_query(&rendered)
            .unwrap_or_else(|e| panic!("rendered query {rendered:?} must parse: {e}"));
        prop_assert_eq!(parsed, plan);
    }
}

proptest! {
    /// Filtering never invents rows: every result satisfies every predicate,
    /// and dropping a conjunct never shrinks the result set.
    #[test]
    fn query_results_satisfy_all_predicates(
        seed_values in proptest::collection::vec(value_strategy(), 1..40),
        predicate in predicate_strategy(),
    ) {
        let records: Vec<serde_json::Value> = seed_values
            .iter()
            .map(|v| serde_json::json!({"payload": v}))
            .collect();
        let fixture_json = serde_json::json!({
            "name": "propfix",
            "profile": "servicenow",
            "tables": {"rec": {
                "schema": [{"name": "payload", "label": "Payload", "type": "string"}],
                "records": records,
            }}
        });
        let fixture = Fixture::from_json(&fixture_json.to_string()).unwrap();
        let state = PlatformState::seed(&fixture);

        let narrowed = QueryPlan {
            conjuncts: vec![Predicate { field: "payload".into(), ..predicate.clone() }],
            order: None,
        };
        let rows = state.query_records("rec", &narrowed, None, None).unwrap();
        for row in &rows {
            let actual = row.get("payload").map(String::as_str).unwrap_or("");
            let holds = match predicate.op {
                QueryOp::Eq => actual == predicate.value,
                QueryOp::Neq => actual != predicate.value,
                QueryOp::Like => actual
                    .to_lowercase()
                    .contains(&predicate.value.to_lowercase()),
            };
            prop_assert!(holds, "row {actual:?} violates the predicate");
        }

        let unfiltered = state
            .query_records("rec", &QueryPlan::default(), None, None)
            .unwrap();
        prop_assert!(rows.len() <= unfiltered.len());
        prop_assert_eq!(unfiltered.len(), seed_values.len());
    }
}

// ---------------------------------------------------------------------------
// Output limits
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    /// Shell output is capped: at most `max_output_bytes` of payload plus
    /// the marker, the marker appears exactly when output was cut, and the
    /// cut never splits a UTF-8 character.
    #[test]
    fn shell_output_respects_the_byte_cap(
        payload_chars in 0usize..600,
        cap in 64usize..256,
        multibyte in proptest::bool::ANY,
    ) {
        let dir = tempfile::TempDir::new().unwrap();
        let limits = ExecLimits { timeout_secs: 10, max_output_bytes: cap };
        let sandbox = Sandbox::new(SandboxPolicy::unrestricted(dir.path()), limits).unwrap();

        let unit = if multibyte { "é" } else { "a" };
        let command = format!("printf '%s' \"{}\"", unit.repeat(payload_chars));
        let result = sandbox.execute(&command).unwrap();

        let payload_bytes = unit.len() * payload_chars;
        prop_assert_eq!(result.truncated, payload_bytes > cap);
        if result.truncated {
            prop_assert!(result.stdout.ends_with(TRUNCATION_MARKER));
            prop_assert!(result.stdout.len() <= cap + TRUNCATION_MARKER.len());
        } else {
            prop_assert_eq!(result.stdout.len(), payload_bytes);
        }
        // String construction already proves the cut landed on a char
        // boundary; spell the invariant out anyway.
        prop_assert!(result.stdout.is_char_boundary(result.stdout.len()));
    }
}

// ---------------------------------------------------------------------------
// Usage and cost arithmetic
// ---------------------------------------------------------------------------

proptest! {
    /// Token usage is a commutative monoid and cost is linear over it.
    #[test]
    fn usage_sums_and_costs_are_order_independent(
        pairs in proptest::collection::vec((0u64..10_000_000, 0u64..10_000_000), 1..20),
        input_price in 0u32..10_000u32,
        output_price in 0u32..10_000u32,
    ) {
        let usages: Vec<TokenUsage> =
            pairs.iter().map(|&(i, o)| TokenUsage::new(i, o)).collect();

        let forward = usages.iter().fold(TokenUsage::default(), |acc, &u| acc + u);
        let backward = usages.iter().rev().fold(TokenUsage::default(), |acc, &u| acc + u);
        prop_assert_eq!(forward, backward);

        let mut pricing = PricingTable::new();
        // Prices with two decimals, e.g. 3.07 — exact decimal strings.
        pricing
            .insert(
                "m",
                &format!("{}.{:02}", input_price / 100, input_price % 100),
                &format!("{}.{:02}", output_price / 100, output_price % 100),
            )
            .unwrap();

        let summed: Cost = usages
            .iter()
            .map(|&u| compute_cost(u, "m", &pricing).unwrap())
            .sum();
        let of_sum = compute_cost(forward, "m", &pricing).unwrap();
        prop_assert_eq!(summed, of_sum);
    }
}

proptest! {
    /// Scaling usage by an integer scales the exact cost by the same factor.
    #[test]
    fn cost_is_linear_in_usage(
        input in 0u64..1_000_000,
        output in 0u64..1_000_000,
        factor in 1u64..50,
    ) {
        let mut pricing = PricingTable::new();
        pricing.insert("m", "3.07", "15.33").unwrap();
        let single = compute_cost(TokenUsage::new(input, output), "m", &pricing).unwrap();
        let scaled =
            compute_cost(TokenUsage::new(input * factor, output * factor), "m", &pricing)
                .unwrap();
        let repeated: Cost = (0..factor).map(|_| single.clone()).sum();
        prop_assert_eq!(repeated, scaled);
    }
}

// ---------------------------------------------------------------------------
// Statistics normalization
// ---------------------------------------------------------------------------

fn category_strategy() -> impl Strategy<Value = OutcomeCategory> {
    (0usize..ALL_CATEGORIES.len()).prop_map(|i| ALL_CATEGORIES[i])
}

proptest! {
    /// Each cohort's fractions are count/total and sum to 1 when non-empty.
    #[test]
    fn breakdown_fractions_normalize(
        calls in proptest::collection::vec((category_strategy(), proptest::bool::ANY), 0..200),
    ) {
        let breakdown = error_breakdown(&calls);
        let (success_total, failure_total) = breakdown.call_totals;
        prop_assert_eq!(success_total + failure_total, calls.len());

        for (cohort, total) in [
            (&breakdown.success, success_total),
            (&breakdown.failure, failure_total),
        ] {
            if total == 0 {
                prop_assert!(cohort.is_empty());
                continue;
            }
            let sum: f64 = cohort.values().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "fractions sum to {sum}");
            for fraction in cohort.values() {
                prop_assert!(*fraction > 0.0 && *fraction <= 1.0);
            }
        }
    }
}

proptest! {
    /// Histogram bins partition the outcomes; over-cap counts land in the
    /// cap bin.
    #[test]
    fn histogram_bins_partition_the_outcomes(
        outcomes in proptest::collection::vec((0usize..30, proptest::bool::ANY), 0..120),
        cap in 1usize..20,
    ) {
        let histogram = tool_call_histogram(&outcomes, cap);
        prop_assert_eq!(histogram.successes.len(), cap + 1);
        prop_assert_eq!(histogram.failures.len(), cap + 1);
        let binned: usize =
            histogram.successes.iter().sum::<usize>() + histogram.failures.iter().sum::<usize>();
        prop_assert_eq!(binned, outcomes.len());

        let over_cap = outcomes.iter().filter(|&&(n, _)| n >= cap).count();
        prop_assert_eq!(
            histogram.successes[cap] + histogram.failures[cap],
            over_cap
        );
    }
}

proptest! {
    /// Answer normalization is idempotent.
    #[test]
    fn answer_normalization_is_idempotent(text in "\\PC{0,60}") {
        let once = normalize_answer(&text);
        let twice = normalize_answer(&once);
        prop_assert_eq!(once, twice);
    }
}

// ---------------------------------------------------------------------------
// Report hygiene
// ---------------------------------------------------------------------------

fn json_strategy() -> impl Strategy<Value = serde_json::Value> {
    let leaf = prop_oneof![
        Just(serde_json::Value::Null),
        proptest::bool::ANY.prop_map(serde_json::Value::from),
        (-1000i64..1000).prop_map(serde_json::Value::from),
        "[a-z_]{0,8}".prop_map(serde_json::Value::from),
    ];
    leaf.prop_recursive(3, 24, 5, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..4).prop_map(serde_json::Value::Array),
            proptest::collection::btree_map(
                prop_oneof![
                    "[a-z_]{1,10}".prop_map(String::from),
                    Just("wall_clock".to_string()),
                    Just("started_at".to_string()),
                ],
                inner,
                0..4
            )
            .prop_map(|m| serde_json::Value::Object(m.into_iter().collect())),
        ]
    })
}

proptest! {
    /// Stripping volatile keys is idempotent and removes every occurrence.
    #[test]
    fn strip_volatile_is_idempotent_and_complete(value in json_strategy()) {
        fn mentions_volatile(value: &serde_json::Value) -> bool {
            match value {
                serde_json::Value::Object(map) => map.iter().any(|(k, v)| {
                    matches!(
                        k.as_str(),
                        "wall_clock" | "mean_wall_clock" | "duration_secs" | "started_at"
                            | "finished_at"
                    ) || mentions_volatile(v)
                }),
                serde_json::Value::Array(items) => items.iter().any(mentions_volatile),
                _ => false,
            }
        }

        let mut once = value;
        strip_volatile(&mut once);
        prop_assert!(!mentions_volatile(&once));
        let mut twice = once.clone();
        strip_volatile(&mut twice);
        prop_assert_eq!(once, twice);
    }
}

// ---------------------------------------------------------------------------
// Episode termination
// ---------------------------------------------------------------------------

fn tiny_setup(dir: &std::path::Path) -> EpisodeSetup {
    let fixture_json = serde_json::json!({
        "name": "prop-episode",
        "profile": "servicenow",
        "tables": {"incident": {
            "schema": [{"name": "number", "label": "Number", "type": "string"}],
            "records": [{"number": "INC0001"}],
        }}
    });
    let fixture = Fixture::from_json(&fixture_json.to_string()).unwrap();
    let handle = shared(PlatformState::seed(&fixture));
    let profile = Profile::from_name("servicenow").unwrap();
    // No live server: the scripted commands below never touch the platform.
    EpisodeSetup::new(profile, "http://127.0.0.1:1", dir, handle)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    /// Whatever the script does — finish cleanly, keep calling tools past
    /// the budget, or run dry — the episode terminates with a total reason,
    /// an in-budget call count, shares that sum to one, and usage equal to
    /// the sum over steps.
    #[test]
    fn episodes_always_terminate_within_budget(
        call_turns in 0usize..5,
        closes_with_text in proptest::bool::ANY,
        errors_on_exhaustion in proptest::bool::ANY,
        max_tool_calls in 0usize..6,
    ) {
        let dir = tempfile::TempDir::new().unwrap();
        let setup = tiny_setup(dir.path());

        let mut turns = Vec::new();
        for i in 0..call_turns {
            let mut arguments = serde_json::Map::new();
            arguments.insert(
                "command".to_string(),
                serde_json::Value::from(format!("echo step-{i}")),
            );
            turns.push(ModelTurn::tools(
                None,
                vec![ToolInvocation {
                    id: String::new(),
                    tool_name: "terminal".to_string(),
                    arguments,
                }],
                TokenUsage::new(10, 2),
            ));
        }
        if closes_with_text {
            turns.push(ModelTurn::text("All done.", TokenUsage::new(5, 1)));
        }
        let exhaustion = if errors_on_exhaustion {
            ExhaustionPolicy::Error
        } else {
            ExhaustionPolicy::FinalMessage
        };
        let provider = make_scripted(TurnScript::new(turns, exhaustion));

        let mut config = AgentConfig::default();
        config.max_tool_calls = max_tool_calls;

        let trace = run_single_agent("Echo some steps.", &config, &setup, &provider).unwrap();

        prop_assert!(trace.tool_call_count <= max_tool_calls);
        match trace.termination {
            TerminationReason::FinalMessage => {
                prop_assert!(!trace.final_message.is_empty());
            }
            TerminationReason::Limit => {
                prop_assert_eq!(trace.tool_call_count, max_tool_calls);
            }
            TerminationReason::ProviderError => {
                prop_assert!(trace.provider_error.is_some());
            }
        }

        if trace.tool_call_count > 0 {
            let share_sum: f64 = trace.toolset_shares.values().sum();
            prop_assert!((share_sum - 1.0).abs() < 1e-9);
        } else {
            prop_assert!(trace.toolset_shares.is_empty());
        }

        let stepwise: TokenUsage = trace
            .steps
            .iter()
            .fold(TokenUsage::default(), |acc, s| acc + s.model_turn.usage);
        prop_assert_eq!(stepwise, trace.total_usage);
    }
}

// ---------------------------------------------------------------------------
// Cost mean
// ---------------------------------------------------------------------------

proptest! {
    /// The mean of n equal costs is that cost, exactly.
    #[test]
    fn mean_of_equal_costs_is_the_cost(
        input in 0u64..1_000_000,
        output in 0u64..1_000_000,
        copies in 1usize..30,
    ) {
        let mut pricing = PricingTable::new();
        pricing.insert("m", "2.00", "8.00").unwrap();
        let cost = compute_cost(TokenUsage::new(input, output), "m", &pricing).unwrap();
        let all = vec![cost.clone(); copies];
        prop_assert_eq!(Cost::mean_of(&all), cost);
    }
}

// Keep the unused-import lint honest: BTreeMap is used in type ascriptions
// inside proptest macros only on some expansions.
#[allow(dead_code)]
type Unused = BTreeMap<String, String>;
