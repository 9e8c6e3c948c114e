//! Run-directory layout and persistence: manifest, traces, reports, and
//! skills growth events.
//!
//! A run directory is self-describing:
//!
//! ```text
//! <run>/
//!   manifest.json        what ran: suite, agent config, provider, jobs
//!   traces.jsonl         one episode trace per line, in suite task order
//!   report.md            human-readable report
//!   report.json          the same numbers, machine-readable
//!   skills-events.jsonl  skills-store snapshot after each task (skills runs)
//!   skills/              the persistent skills root (skills runs)
//!   workdirs/<task>/     per-task scratch workspaces
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, Trace};

use super::{HarnessError, ProviderSpec};

/// Resolved file locations inside one run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunPaths { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn traces(&self) -> PathBuf {
        self.root.join("traces.jsonl")
    }

    pub fn report_md(&self) -> PathBuf {
        self.root.join("report.md")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn skills_events(&self) -> PathBuf {
        self.root.join("skills-events.jsonl")
    }

    pub fn skills_root(&self) -> PathBuf {
        self.root.join("skills")
    }

    pub fn workdir(&self, task_id: &str) -> PathBuf {
        self.root.join("workdirs").join(task_id)
    }
}

/// What a run directory contains, written before the first task starts and
/// finalized after the last one ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub suite: String,
    pub suite_path: String,
    pub fixture: String,
    pub agent: AgentConfig,
    pub provider: ProviderSpec,
    pub jobs: usize,
    pub task_count: usize,
    /// Unix seconds; volatile across runs.
    pub started_at: f64,
    #[serde(default)]
    pub finished_at: f64,
}

pub(crate) fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn write_manifest(paths: &RunPaths, manifest: &RunManifest) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(paths.manifest(), text + "\n")?;
    Ok(())
}

pub fn read_manifest(paths: &RunPaths) -> Result<RunManifest, HarnessError> {
    let text = fs::read_to_string(paths.manifest())?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Suite(format!("malformed manifest in {}: {e}", paths.root().display())))
}

/// Write all traces as JSON Lines, one complete trace per line, preserving
/// the given order.
pub fn write_traces(path: &Path, traces: &[Trace]) -> Result<(), HarnessError> {
    let mut file = fs::File::create(path)?;
    for trace in traces {
        let line = serde_json::to_string(trace).expect("traces serialize");
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Read a traces file back; errors name the offending line.
pub fn read_traces(path: &Path) -> Result<Vec<Trace>, HarnessError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(index, line)| {
            serde_json::from_str(line).map_err(|e| {
                HarnessError::Suite(format!(
                    "malformed trace on line {} of {}: {e}",
                    index + 1,
                    path.display()
                ))
            })
        })
        .collect()
}

/// Append one JSON value as a line to a `.jsonl` file (creating it if
/// needed).
pub fn append_jsonl(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(value).expect("event serializes");
    writeln!(file, "{line}")?;
    Ok(())
}
