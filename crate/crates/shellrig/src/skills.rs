//! Persistent, file-backed skills memory.
//!
//! Skills are markdown-style files under a `skills/` root with a lifecycle
//! status line (`**Status:** unverified` → `verified`) and four canonical
//! sections. The agent reads and writes these files natively through its
//! shell; this store is the harness-side observer for the same tree —
//! search, parse, upsert, status transitions, and growth statistics.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

/// Lifecycle status; promotion is monotone (never verified → unverified).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillStatus {
    Unverified,
    Verified,
}

impl std::fmt::Display for SkillStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SkillStatus::Unverified => "unverified",
            SkillStatus::Verified => "verified",
        })
    }
}

/// Bodies of the four canonical sections; missing headings parse as empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkillSections {
    pub when_to_use: String,
    pub procedure: String,
    pub important_details: String,
    pub pitfalls: String,
}

/// A parsed skill file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skill {
    /// Path relative to the skills root; empty for skills parsed from bare text.
    pub path: String,
    pub title: String,
    pub status: SkillStatus,
    pub sections: SkillSections,
    pub size_bytes: u64,
}

/// Directory-level growth statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkillStats {
    pub file_count: usize,
    pub total_kilobytes: f64,
    /// Top-level directory → file count; root-level files count under ".".
    pub per_directory_counts: BTreeMap<String, usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum SkillsError {
    #[error("path escapes the skills root: {0}")]
    PathEscape(String),
    #[error("skill has no **Status:** line")]
    MissingStatusLine,
    #[error("skill has more than one **Status:** line")]
    DuplicateStatusLine,
    #[error("unknown status value: {0:?} (expected \"unverified\" or \"verified\")")]
    UnknownStatusValue(String),
    #[error("illegal status transition: {from} -> {to}")]
    IllegalTransition { from: SkillStatus, to: SkillStatus },
    #[error("skill file not found: {0}")]
    NotFound(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

const STATUS_PREFIX: &str = "**Status:**";

/// Parse skill text: extract the status line and the four canonical sections.
///
/// The status grammar is exactly `**Status:** unverified|verified` — one such
/// line per file; any other value (including case variants) is an error, so
/// lifecycle statistics can't silently drift.
pub fn parse_skill(content: &str) -> Result<Skill, SkillsError> {
    let mut status = None;
    for line in content.lines() {
        let line = line.trim();
        if let Some(value) = line.strip_prefix(STATUS_PREFIX) {
            if status.is_some() {
                return Err(SkillsError::DuplicateStatusLine);
            }
            status = Some(match value.trim() {
                "unverified" => SkillStatus::Unverified,
                "verified" => SkillStatus::Verified,
                other => return Err(SkillsError::UnknownStatusValue(other.to_string())),
            });
        }
    }
    let status = status.ok_or(SkillsError::MissingStatusLine)?;

    let title = content
        .lines()
        .find_map(|l| l.trim().strip_prefix("# ").map(str::trim))
        .unwrap_or_default()
        .to_string();

    let mut sections = SkillSections::default();
    let mut current: Option<&mut String> = None;
    let mut body: Vec<&str> = Vec::new();
    let flush = |target: Option<&mut String>, body: &mut Vec<&str>| {
        if let Some(t) = target {
            *t = body.join("\n").trim().to_string();
        }
        body.clear();
    };
    for line in content.lines() {
        if let Some(heading) = line.trim().strip_prefix("## ") {
            flush(current.take(), &mut body);
            current = match heading.trim() {
                "When to use" => Some(&mut sections.when_to_use),
                "Procedure" => Some(&mut sections.procedure),
                "Important details" => Some(&mut sections.important_details),
                "Pitfalls" => Some(&mut sections.pitfalls),
                _ => None,
            };
        } else if current.is_some() {
            body.push(line);
        }
    }
    flush(current.take(), &mut body);

    Ok(Skill {
        path: String::new(),
        title,
        status,
        sections,
        size_bytes: content.len() as u64,
    })
}

/// Observer over one on-disk skills root.
#[derive(Debug, Clone)]
pub struct SkillsStore {
    root: PathBuf,
}

impl SkillsStore {
    /// Open (creating if needed) the skills root.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, SkillsError> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(SkillsStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative paths of files whose content contains `keyword`
    /// (case-insensitive), sorted lexicographically.
    pub fn search(&self, keyword: &str) -> Vec<String> {
        let needle = keyword.to_lowercase();
        let mut hits: Vec<String> = self
            .files()
            .into_iter()
            .filter(|rel| {
                std::fs::read_to_string(self.root.join(rel))
                    .map(|c| c.to_lowercase().contains(&needle))
                    .unwrap_or(false)
            })
            .collect();
        hits.sort();
        hits
    }

    /// All skill-file paths relative to the root, sorted.
    pub fn files(&self) -> Vec<String> {
        let mut files: Vec<String> = WalkDir::new(&self.root)
            .into_iter()
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_file())
            .filter_map(|e| {
                e.path()
                    .strip_prefix(&self.root)
                    .ok()
                    .map(|p| p.to_string_lossy().into_owned())
            })
            .collect();
        files.sort();
        files
    }

    /// Read and parse one skill.
    pub fn load(&self, rel_path: &str) -> Result<Skill, SkillsError> {
        let rel = confine(rel_path)?;
        let full = self.root.join(&rel);
        if !full.is_file() {
            return Err(SkillsError::NotFound(rel_path.to_string()));
        }
        let content = std::fs::read_to_string(&full)?;
        let mut skill = parse_skill(&content)?;
        skill.path = rel.to_string_lossy().into_owned();
        skill.size_bytes = std::fs::metadata(&full)?.len();
        Ok(skill)
    }

    /// Create or replace the file for one topic (one file per topic —
    /// update, don't duplicate). Parent directories are created as needed.
    pub fn upsert(&self, topic_filename: &str, content: &str) -> Result<String, SkillsError> {
        let rel = confine(topic_filename)?;
        let full = self.root.join(&rel);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&full, content)?;
        Ok(rel.to_string_lossy().into_owned())
    }

    /// Rewrite the status line; `verified → unverified` is rejected, and
    /// same-status writes are idempotent no-ops.
    pub fn set_status(&self, rel_path: &str, new_status: SkillStatus) -> Result<(), SkillsError> {
        let skill = self.load(rel_path)?;
        if skill.status == new_status {
            return Ok(());
        }
        if skill.status == SkillStatus::Verified && new_status == SkillStatus::Unverified {
            return Err(SkillsError::IllegalTransition {
                from: skill.status,
                to: new_status,
            });
        }
        let full = self.root.join(confine(rel_path)?);
        let content = std::fs::read_to_string(&full)?;
        let rewritten: Vec<String> = content
            .lines()
            .map(|line| {
                if line.trim().starts_with(STATUS_PREFIX) {
                    format!("{STATUS_PREFIX} {new_status}")
                } else {
                    line.to_string()
                }
            })
            .collect();
        let mut out = rewritten.join("\n");
        if content.ends_with('\n') {
            out.push('\n');
        }
        std::fs::write(&full, out)?;
        Ok(())
    }

    /// Live counts and sizes for the directory tree.
    pub fn stats(&self) -> SkillStats {
        let mut stats = SkillStats::default();
        let mut total_bytes = 0u64;
        for rel in self.files() {
            stats.file_count += 1;
            total_bytes += std::fs::metadata(self.root.join(&rel)).map(|m| m.len()).unwrap_or(0);
            let top = match Path::new(&rel).components().next() {
                Some(Component::Normal(c)) if Path::new(&rel).components().count() > 1 => {
                    c.to_string_lossy().into_owned()
                }
                _ => ".".to_string(),
            };
            *stats.per_directory_counts.entry(top).or_insert(0) += 1;
        }
        stats.total_kilobytes = total_bytes as f64 / 1024.0;
        stats
    }
}

/// Normalize a topic path and reject anything resolving outside the root.
fn confine(rel_path: &str) -> Result<PathBuf, SkillsError> {
    let path = Path::new(rel_path);
    if path.is_absolute() {
        return Err(SkillsError::PathEscape(rel_path.to_string()));
    }
    let mut normalized = PathBuf::new();
    for component in path.components() {
        match component {
            Component::Normal(c) => normalized.push(c),
            Component::CurDir => {}
            _ => return Err(SkillsError::PathEscape(rel_path.to_string())),
        }
    }
    if normalized.as_os_str().is_empty() {
        return Err(SkillsError::PathEscape(rel_path.to_string()));
    }
    Ok(normalized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    const TEMPLATE: &str = "\
# Create a change request

**Status:** unverified

## When to use
When asked to open a change request.

## Procedure
1. POST to the change_request table.

## Important details
State codes are strings.

## Pitfalls
Do NOT inline multiline JSON.
";

    fn store(dir: &TempDir) -> SkillsStore {
        SkillsStore::open(dir.path().join("skills")).unwrap()
    }

    #[test]
    fn search_on_empty_root_is_empty() {
        let dir = TempDir::new().unwrap();
        assert!(store(&dir).search("anything").is_empty());
    }

    #[test]
    fn search_finds_substrings_case_insensitively_in_sorted_order() {
        let dir = TempDir::new().unwrap();
        let s = store(&dir);
        s.upsert("procedures/b_change_request.md", TEMPLATE).unwrap();
        s.upsert("api/a_change_request.md", TEMPLATE).unwrap();
        s.upsert("api/unrelated.md", "# Other\n\n**Status:** unverified\n").unwrap();
        assert_eq!(
            s.search("CHANGE_REQUEST"),
            vec!["api/a_change_request.md", "procedures/b_change_request.md"]
        );
        assert_eq!(s.search("nope"), Vec::<String>::new());
    }

    #[test]
    fn parse_extracts_status_title_and_sections() {
        let skill = parse_skill(TEMPLATE).unwrap();
        assert_eq!(skill.status, SkillStatus::Unverified);
        assert_eq!(skill.title, "Create a change request");
        assert_eq!(skill.sections.when_to_use, "When asked to open a change request.");
        assert_eq!(skill.sections.pitfalls, "Do NOT inline multiline JSON.");
    }

    #[test]
    fn parse_verified_skill() {
        let content = TEMPLATE.replace("**Status:** unverified", "**Status:** verified");
        assert_eq!(parse_skill(&content).unwrap().status, SkillStatus::Verified);
    }

    #[test]
    fn missing_headings_parse_as_empty_sections() {
        let skill = parse_skill("# T\n\n**Status:** unverified\n\n## Procedure\nstep\n").unwrap();
        assert_eq!(skill.sections.procedure, "step");
        assert_eq!(skill.sections.when_to_use, "");
        assert_eq!(skill.sections.pitfalls, "");
    }

    #[test]
    fn status_line_errors() {
        assert!(matches!(parse_skill("# T\nno status\n"), Err(SkillsError::MissingStatusLine)));
        assert!(matches!(
            parse_skill("**Status:** unverified\n**Status:** verified\n"),
            Err(SkillsError::DuplicateStatusLine)
        ));
        assert!(matches!(
            parse_skill("**Status:** Verified\n"),
            Err(SkillsError::UnknownStatusValue(v)) if v == "Verified"
        ));
    }

    #[test]
    fn upsert_creates_then_replaces_without_duplicating() {
        let dir = TempDir::new().unwrap();
        let s = store(&dir);
        let path = s.upsert("procedures/create_change_request.md", TEMPLATE).unwrap();
        assert_eq!(path, "procedures/create_change_request.md");
        assert_eq!(s.stats().file_count, 1);
        assert_eq!(s.search("change request").len(), 1);

        let updated = TEMPLATE.replace("open a change request", "file a change request");
        s.upsert("procedures/create_change_request.md", &updated).unwrap();
        assert_eq!(s.stats().file_count, 1, "update must not duplicate");
        assert!(s.load(&path).unwrap().sections.when_to_use.contains("file a change request"));
    }

    #[test]
    fn path_escapes_are_rejected() {
        let dir = TempDir::new().unwrap();
        let s = store(&dir);
        for bad in ["../outside.md", "/etc/passwd", "a/../../b.md", ""] {
            assert!(
                matches!(s.upsert(bad, "x"), Err(SkillsError::PathEscape(_))),
                "expected escape error for {bad:?}"
            );
        }
        // `a/../b.md` normalizes inside the root but still contains `..` — rejected.
        assert!(s.upsert("a/./b.md", TEMPLATE).is_ok());
    }

    #[test]
    fn status_promotion_is_monotone() {
        let dir = TempDir::new().unwrap();
        let s = store(&dir);
        let path = s.upsert("p.md", TEMPLATE).unwrap();

        s.set_status(&path, SkillStatus::Unverified).unwrap(); // idempotent no-op
        s.set_status(&path, SkillStatus::Verified).unwrap();
        assert_eq!(s.load(&path).unwrap().status, SkillStatus::Verified);

        s.set_status(&path, SkillStatus::Verified).unwrap(); // idempotent no-op
        let err = s.set_status(&path, SkillStatus::Unverified).unwrap_err();
        assert!(matches!(err, SkillsError::IllegalTransition { .. }));
        assert_eq!(s.load(&path).unwrap().status, SkillStatus::Verified);
    }

    #[test]
    fn set_status_touches_only_the_status_line() {
        let dir = TempDir::new().unwrap();
        let s = store(&dir);
        let path = s.upsert("p.md", TEMPLATE).unwrap();
        s.set_status(&path, SkillStatus::Verified).unwrap();
        let content = std::fs::read_to_string(s.root().join(&path)).unwrap();
        assert_eq!(content, TEMPLATE.replace("**Status:** unverified", "**Status:** verified"));
    }

    #[test]
    fn stats_reflect_sizes_and_directories() {
        let dir = TempDir::new().unwrap();
        let s = store(&dir);
        assert_eq!(s.stats(), SkillStats::default());

        let fixed = "# T\n\n**Status:** unverified\n\n## Procedure\n";
        let body_1843 = format!("{fixed}{}\n", "x".repeat(1843 - fixed.len() - 1));
        assert_eq!(body_1843.len(), 1843);
        s.upsert("procedures/a.md", &body_1843).unwrap();
        s.upsert("root_level.md", TEMPLATE).unwrap();

        let stats = s.stats();
        assert_eq!(stats.file_count, 2);
        assert!((stats.total_kilobytes - (1843 + TEMPLATE.len()) as f64 / 1024.0).abs() < 1e-9);
        assert_eq!(stats.per_directory_counts["procedures"], 1);
        assert_eq!(stats.per_directory_counts["."], 1);
        // Plausibility anchor: a 1843-byte skill is ~1.8 KB.
        assert!((1843.0_f64 / 1024.0 - 1.8).abs() < 0.01);
    }
}
