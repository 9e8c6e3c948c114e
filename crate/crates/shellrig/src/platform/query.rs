//! The `sysparm_query` grammar: `^`-joined conjuncts with EQ/NEQ/LIKE
//! predicates plus at most one `ORDERBY`/`ORDERBYDESC` clause.
//!
//! Grammar subset by design: `^OR` disjunction is rejected as malformed with
//! a clear message. Within a token, operator precedence is `!=`, then `LIKE`,
//! then `=`, splitting at the leftmost occurrence.

use serde::{Deserialize, Serialize};

/// Predicate operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOp {
    Eq,
    Neq,
    /// Case-insensitive substring containment.
    Like,
}

/// One conjunct: `field <op> value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub field: String,
    pub op: QueryOp,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Asc,
    Desc,
}

/// The optional ordering clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderClause {
    pub field: String,
    pub direction: Direction,
}

/// Parsed query: conjuncts (possibly empty) and at most one order clause.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub conjuncts: Vec<Predicate>,
    pub order: Option<OrderClause>,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("malformed token {token:?}: {reason}")]
    MalformedToken { token: String, reason: String },
}

fn malformed(token: &str, reason: &str) -> QueryError {
    QueryError::MalformedToken {
        token: token.to_string(),
        reason: reason.to_string(),
    }
}

/// Parse a `sysparm_query` string. Empty input is an empty plan.
pub fn parse_query(q: &str) -> Result<QueryPlan, QueryError> {
    let mut plan = QueryPlan::default();
    if q.is_empty() {
        return Ok(plan);
    }
    for token in q.split('^') {
        if let Some(field) = token.strip_prefix("ORDERBYDESC") {
            set_order(&mut plan, token, field, Direction::Desc)?;
        } else if let Some(field) = token.strip_prefix("ORDERBY") {
            set_order(&mut plan, token, field, Direction::Asc)?;
        } else if token.starts_with("OR") {
            return Err(malformed(
                token,
                "^OR disjunction is not supported; use separate queries",
            ));
        } else {
            plan.conjuncts.push(parse_predicate(token)?);
        }
    }
    Ok(plan)
}

fn set_order(
    plan: &mut QueryPlan,
    token: &str,
    field: &str,
    direction: Direction,
) -> Result<(), QueryError> {
    if field.is_empty() {
        return Err(malformed(token, "order clause is missing a field name"));
    }
    if plan.order.is_some() {
        return Err(malformed(token, "more than one order clause"));
    }
    plan.order = Some(OrderClause {
        field: field.to_string(),
        direction,
    });
    Ok(())
}

fn parse_predicate(token: &str) -> Result<Predicate, QueryError> {
    let (field, op, value) = if let Some(at) = token.find("!=") {
        (&token[..at], QueryOp::Neq, &token[at + 2..])
    } else if let Some(at) = token.find("LIKE") {
        (&token[..at], QueryOp::Like, &token[at + 4..])
    } else if let Some(at) = token.find('=') {
        (&token[..at], QueryOp::Eq, &token[at + 1..])
    } else {
        return Err(malformed(token, "no recognizable operator (=, !=, LIKE)"));
    };
    if field.is_empty() {
        return Err(malformed(token, "predicate is missing a field name"));
    }
    Ok(Predicate {
        field: field.to_string(),
        op,
        value: value.to_string(),
    })
}

/// Render a plan back to `sysparm_query` syntax; `parse_query ∘ render_query`
/// is the identity on plans built from grammar-valid input.
pub fn render_query(plan: &QueryPlan) -> String {
    let mut tokens: Vec<String> = plan
        .conjuncts
        .iter()
        .map(|p| match p.op {
            QueryOp::Eq => format!("{}={}", p.field, p.value),
            QueryOp::Neq => format!("{}!={}", p.field, p.value),
            QueryOp::Like => format!("{}LIKE{}", p.field, p.value),
        })
        .collect();
    if let Some(order) = &plan.order {
        tokens.push(match order.direction {
            Direction::Asc => format!("ORDERBY{}", order.field),
            Direction::Desc => format!("ORDERBYDESC{}", order.field),
        });
    }
    tokens.join("^")
}
