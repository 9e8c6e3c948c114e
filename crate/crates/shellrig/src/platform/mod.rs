//! An embedded mock of a ServiceNow-style enterprise platform.
//!
//! The platform boots from a [`Fixture`], keeps every table in memory, and
//! exposes the same operations over two transports: an HTTP facade
//! ([`http`]) and a direct in-process handle used by tool registries. State
//! is deliberately deterministic — record identifiers and creation
//! timestamps derive from a monotonic creation counter, so equal operation
//! sequences produce byte-identical state digests.
//!
//! [`snapshot`](PlatformState::snapshot) / [`reset`](PlatformState::reset)
//! bracket benchmark tasks: the harness captures the seeded state once and
//! rolls back after every episode.

pub mod fixture;
pub mod http;
pub mod profile;
pub mod query;

pub use fixture::{
    FieldDef, FieldType, Fixture, FixtureError, FixtureTable, SYS_CREATED_ON_FIELD, SYS_ID_FIELD,
};
pub use http::{handle_request, HttpReply, PlatformServer};
pub use profile::Profile;
pub use query::{
    parse_query, render_query, Direction, OrderClause, Predicate, QueryError, QueryOp, QueryPlan,
};

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A stored record: stringly-typed field values, every schema field present.
pub type Record = BTreeMap<String, String>;

/// Shared, lockable platform state — the form both the HTTP facade and the
/// in-process tool registry hold.
pub type PlatformHandle = Arc<Mutex<PlatformState>>;

/// Wrap freshly seeded state in a shareable handle.
pub fn shared(state: PlatformState) -> PlatformHandle {
    Arc::new(Mutex::new(state))
}

/// The creation-counter origin rendered as a timestamp; counter value `n`
/// maps to this instant plus `n` seconds.
pub const TIMESTAMP_ORIGIN: &str = "2024-01-01 00:00:00";

/// Days from 1970-01-01 to 2024-01-01 in the proleptic Gregorian calendar.
const ORIGIN_EPOCH_DAYS: i64 = 19_723;

#[derive(Debug, thiserror::Error)]
pub enum PlatformError {
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("no record with that sys_id")]
    UnknownRecord,
    #[error("unknown order field {0:?}")]
    UnknownOrderField(String),
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TableState {
    schema: Vec<FieldDef>,
    records: Vec<Record>,
}

/// In-memory platform state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformState {
    fixture_name: String,
    profile: String,
    tables: BTreeMap<String, TableState>,
    creation_counter: u64,
}

/// A full copy of platform state, including the creation counter, so a
/// rolled-back instance reissues identical identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot(PlatformState);

impl PlatformState {
    /// Build state from a fixture: every schema gains the bookkeeping fields
    /// and every seed record gets an ordinal `sys_id` / `sys_created_on`.
    pub fn seed(fixture: &Fixture) -> Self {
        let mut state = PlatformState {
            fixture_name: fixture.name.clone(),
            profile: fixture.profile.clone(),
            tables: BTreeMap::new(),
            creation_counter: 0,
        };
        for (name, def) in &fixture.tables {
            let mut schema = def.schema.clone();
            schema.push(FieldDef {
                name: SYS_ID_FIELD.to_string(),
                label: "Sys ID".to_string(),
                field_type: FieldType::String,
            });
            schema.push(FieldDef {
                name: SYS_CREATED_ON_FIELD.to_string(),
                label: "Created".to_string(),
                field_type: FieldType::Datetime,
            });
            state.tables.insert(
                name.clone(),
                TableState {
                    schema,
                    records: Vec::new(),
                },
            );
        }
        for (name, def) in &fixture.tables {
            for seed_record in &def.records {
                let stamped = state.stamp_record(name, seed_record);
                state
                    .tables
                    .get_mut(name)
                    .expect("table was just inserted")
                    .records
                    .push(stamped);
            }
        }
        state
    }

    pub fn fixture_name(&self) -> &str {
        &self.fixture_name
    }

    pub fn profile(&self) -> &str {
        &self.profile
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables.keys().cloned().collect()
    }

    pub fn schema(&self, table: &str) -> Result<&[FieldDef], PlatformError> {
        Ok(&self.table(table)?.schema)
    }

    fn table(&self, table: &str) -> Result<&TableState, PlatformError> {
        self.tables
            .get(table)
            .ok_or_else(|| PlatformError::UnknownTable(table.to_string()))
    }

    /// Build a full row for `table`: declared fields from `values` (missing
    /// ones default to empty), unknown keys dropped, bookkeeping fields
    /// assigned from the creation counter. Advances the counter.
    fn stamp_record(&mut self, table: &str, values: &Record) -> Record {
        let counter = self.creation_counter;
        self.creation_counter += 1;
        let sys_id = make_sys_id(&self.fixture_name, counter);
        let created = render_ordinal_timestamp(counter);
        let schema = &self.tables[table].schema;
        let mut record = Record::new();
        for field in schema {
            let value = match field.name.as_str() {
                SYS_ID_FIELD => sys_id.clone(),
                SYS_CREATED_ON_FIELD => created.clone(),
                name => values.get(name).cloned().unwrap_or_default(),
            };
            record.insert(field.name.clone(), value);
        }
        record
    }

    /// Run a parsed query: filter, order, project, limit.
    ///
    /// * A predicate naming a field outside the schema matches nothing.
    /// * `fields: Some(..)` projects the requested fields (missing → empty
    ///   string); `sys_id` is always included. `None` returns full rows.
    pub fn query_records(
        &self,
        table: &str,
        plan: &QueryPlan,
        fields: Option<&[String]>,
        limit: Option<usize>,
    ) -> Result<Vec<Record>, PlatformError> {
        let table_state = self.table(table)?;
        let mut indices = self.evaluate(table, plan)?;
        if let Some(n) = limit {
            indices.truncate(n);
        }
        Ok(indices
            .into_iter()
            .map(|i| project(&table_state.records[i], fields))
            .collect())
    }

    /// Filter and order only; returns indices into the table's record list.
    fn evaluate(&self, table: &str, plan: &QueryPlan) -> Result<Vec<usize>, PlatformError> {
        let table_state = self.table(table)?;
        let in_schema =
            |name: &str| table_state.schema.iter().any(|field| field.name == name);
        let mut indices: Vec<usize> = (0..table_state.records.len())
            .filter(|&i| {
                plan.conjuncts.iter().all(|predicate| {
                    if !in_schema(&predicate.field) {
                        return false;
                    }
                    let actual = table_state.records[i]
                        .get(&predicate.field)
                        .map(String::as_str)
                        .unwrap_or("");
                    match predicate.op {
                        QueryOp::Eq => actual == predicate.value,
                        QueryOp::Neq => actual != predicate.value,
                        QueryOp::Like => actual
                            .to_lowercase()
                            .contains(&predicate.value.to_lowercase()),
                    }
                })
            })
            .collect();
        if let Some(order) = &plan.order {
            let field_def = table_state
                .schema
                .iter()
                .find(|field| field.name == order.field)
                .ok_or_else(|| PlatformError::UnknownOrderField(order.field.clone()))?;
            let field_type = field_def.field_type;
            indices.sort_by(|&a, &b| {
                let left = &table_state.records[a];
                let right = &table_state.records[b];
                let lv = left.get(&order.field).map(String::as_str).unwrap_or("");
                let rv = right.get(&order.field).map(String::as_str).unwrap_or("");
                let primary = compare_values(field_type, lv, rv);
                let primary = match order.direction {
                    Direction::Asc => primary,
                    Direction::Desc => primary.reverse(),
                };
                primary.then_with(|| {
                    let lid = left.get(SYS_ID_FIELD).map(String::as_str).unwrap_or("");
                    let rid = right.get(SYS_ID_FIELD).map(String::as_str).unwrap_or("");
                    lid.cmp(rid)
                })
            });
        }
        Ok(indices)
    }

    pub fn get_record(&self, table: &str, sys_id: &str) -> Result<Record, PlatformError> {
        self.table(table)?
            .records
            .iter()
            .find(|record| record.get(SYS_ID_FIELD).map(String::as_str) == Some(sys_id))
            .cloned()
            .ok_or(PlatformError::UnknownRecord)
    }

    /// Insert a record. Unknown keys are dropped; `sys_id` and
    /// `sys_created_on` are always server-assigned. Returns the stored row.
    pub fn create_record(
        &mut self,
        table: &str,
        values: &Record,
    ) -> Result<Record, PlatformError> {
        self.table(table)?;
        let record = self.stamp_record(table, values);
        self.tables
            .get_mut(table)
            .expect("checked above")
            .records
            .push(record.clone());
        Ok(record)
    }

    /// Patch a record in place. Unknown keys and the bookkeeping fields are
    /// ignored — `sys_id` is immutable. Returns the updated row.
    pub fn update_record(
        &mut self,
        table: &str,
        sys_id: &str,
        values: &Record,
    ) -> Result<Record, PlatformError> {
        let table_state = self
            .tables
            .get_mut(table)
            .ok_or_else(|| PlatformError::UnknownTable(table.to_string()))?;
        let allowed: Vec<String> = table_state
            .schema
            .iter()
            .map(|field| field.name.clone())
            .filter(|name| name != SYS_ID_FIELD && name != SYS_CREATED_ON_FIELD)
            .collect();
        let record = table_state
            .records
            .iter_mut()
            .find(|record| record.get(SYS_ID_FIELD).map(String::as_str) == Some(sys_id))
            .ok_or(PlatformError::UnknownRecord)?;
        for (key, value) in values {
            if allowed.iter().any(|name| name == key) {
                record.insert(key.clone(), value.clone());
            }
        }
        Ok(record.clone())
    }

    pub fn delete_record(&mut self, table: &str, sys_id: &str) -> Result<(), PlatformError> {
        let table_state = self
            .tables
            .get_mut(table)
            .ok_or_else(|| PlatformError::UnknownTable(table.to_string()))?;
        let before = table_state.records.len();
        table_state
            .records
            .retain(|record| record.get(SYS_ID_FIELD).map(String::as_str) != Some(sys_id));
        if table_state.records.len() == before {
            return Err(PlatformError::UnknownRecord);
        }
        Ok(())
    }

    /// Capture everything needed to roll back, including the creation
    /// counter, so identifiers reissue identically after a reset.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.clone())
    }

    pub fn reset(&mut self, snapshot: &Snapshot) {
        *self = snapshot.0.clone();
    }

    /// SHA-256 over the canonical JSON serialization of all tables. Two
    /// states with equal digests hold byte-identical table data.
    pub fn state_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.tables).expect("table state serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn compare_values(field_type: FieldType, left: &str, right: &str) -> std::cmp::Ordering {
    if field_type == FieldType::Number {
        let parse = |s: &str| s.trim().parse::<f64>().ok().filter(|v| !v.is_nan());
        match (parse(left), parse(right)) {
            (Some(l), Some(r)) => {
                return l.partial_cmp(&r).expect("NaN filtered out");
            }
            // Parseable numbers sort before unparseable values.
            (Some(_), None) => return std::cmp::Ordering::Less,
            (None, Some(_)) => return std::cmp::Ordering::Greater,
            (None, None) => {}
        }
    }
    left.cmp(right)
}

fn project(record: &Record, fields: Option<&[String]>) -> Record {
    match fields {
        None => record.clone(),
        Some(list) => {
            let mut out = Record::new();
            for field in list {
                out.insert(
                    field.clone(),
                    record.get(field).cloned().unwrap_or_default(),
                );
            }
            out.insert(
                SYS_ID_FIELD.to_string(),
                record.get(SYS_ID_FIELD).cloned().unwrap_or_default(),
            );
            out
        }
    }
}

/// Deterministic record identifier: the first 32 hex digits of
/// `SHA-256("{fixture_name}:{counter}")`.
pub fn make_sys_id(fixture_name: &str, counter: u64) -> String {
    let digest = Sha256::digest(format!("{fixture_name}:{counter}").as_bytes());
    hex::encode(digest)[..32].to_string()
}

/// Render creation-counter value `n` as the origin instant plus `n` seconds
/// in `YYYY-MM-DD HH:MM:SS` form.
pub fn render_ordinal_timestamp(counter: u64) -> String {
    let days = (counter / 86_400) as i64 + ORIGIN_EPOCH_DAYS;
    let seconds = counter % 86_400;
    let (year, month, day) = civil_from_days(days);
    format!(
        "{year:04}-{month:02}-{day:02} {:02}:{:02}:{:02}",
        seconds / 3_600,
        (seconds % 3_600) / 60,
        seconds % 60
    )
}

// Days-since-1970 to calendar date (proleptic Gregorian), via the classic
// era/year-of-era decomposition with March-based months.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1_460 + doe / 36_524 - doe / 146_096) / 365;
    let year = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if month <= 2 { year + 1 } else { year }, month, day)
}
