//! Fixture files: the seed data a platform instance boots from.
//!
//! A fixture is a JSON document naming the dataset, the wire profile it
//! emulates, and a set of tables. Every table carries a field schema and the
//! seed records. Two bookkeeping fields, `sys_id` and `sys_created_on`, are
//! owned by the platform: they are appended to every schema automatically and
//! must not appear in the fixture's own field list.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Field name of the server-assigned record identifier.
pub const SYS_ID_FIELD: &str = "sys_id";
/// Field name of the server-assigned creation timestamp.
pub const SYS_CREATED_ON_FIELD: &str = "sys_created_on";

/// Declared type of a schema field. `number` and `datetime` only affect
/// ordering; storage is stringly typed like the real wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    String,
    Number,
    Datetime,
}

/// One schema entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    pub label: String,
    #[serde(rename = "type")]
    pub field_type: FieldType,
}

/// A table definition: schema plus seed records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureTable {
    pub schema: Vec<FieldDef>,
    #[serde(default)]
    pub records: Vec<BTreeMap<String, String>>,
}

/// A complete fixture document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub profile: String,
    pub tables: BTreeMap<String, FixtureTable>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("failed to read fixture: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed fixture: {0}")]
    Malformed(String),
}

impl Fixture {
    /// Parse and validate a fixture from JSON text.
    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let fixture: Fixture = serde_json::from_str(text)?;
        fixture.validate()?;
        Ok(fixture)
    }

    /// Load a fixture from a file.
    pub fn from_file(path: &Path) -> Result<Self, FixtureError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), FixtureError> {
        let reserved = [SYS_ID_FIELD, SYS_CREATED_ON_FIELD];
        for (table, def) in &self.tables {
            let mut names: Vec<&str> = Vec::new();
            for field in &def.schema {
                if field.name.is_empty() {
                    return Err(FixtureError::Malformed(format!(
                        "table {table:?} has a field with an empty name"
                    )));
                }
                if reserved.contains(&field.name.as_str()) {
                    return Err(FixtureError::Malformed(format!(
                        "table {table:?} declares reserved field {:?}",
                        field.name
                    )));
                }
                if names.contains(&field.name.as_str()) {
                    return Err(FixtureError::Malformed(format!(
                        "table {table:?} declares field {:?} twice",
                        field.name
                    )));
                }
                names.push(&field.name);
            }
            for (index, record) in def.records.iter().enumerate() {
                for key in record.keys() {
                    if !names.contains(&key.as_str()) {
                        return Err(FixtureError::Malformed(format!(
                            "table {table:?} record {index} sets unknown field {key:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
