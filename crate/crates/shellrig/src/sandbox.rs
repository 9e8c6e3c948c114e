//! Sandboxed shell execution.
//!
//! Commands run under `sh -c` in a private working directory, in their own
//! process group so a timeout kills the whole tree. Output is captured with
//! a byte cap; the combined stream is truncated at a char boundary and marked
//! with [`TRUNCATION_MARKER`] when cut. An optional read-only-HTTP policy
//! lexically denies explicit mutating method tokens before execution.

use std::collections::BTreeMap;
use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Marker appended when captured output exceeds the byte cap.
pub const TRUNCATION_MARKER: &str = "[OUTPUT TRUNCATED]";

/// Synthetic exit code reported for timed-out commands.
pub const TIMEOUT_EXIT_CODE: i32 = 124;

/// Placeholder observation for commands that produce no output.
pub const NO_OUTPUT: &str = "[no output]";

/// Reason attached to policy denials in read-only mode.
pub const READ_ONLY_DENY_REASON: &str =
    "state-changing API calls are not permitted in the planning phase";

/// Execution limits; defaults are 30 s and 16 KiB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecLimits {
    pub timeout_secs: u64,
    pub max_output_bytes: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            timeout_secs: 30,
            max_output_bytes: 16_384,
        }
    }
}

/// Outcome of one sandboxed command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
    /// Wall-clock seconds; excluded from deterministic-replay comparisons.
    pub duration_secs: f64,
    pub truncated: bool,
    pub timed_out: bool,
}

/// Sandbox request-method policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    #[default]
    Unrestricted,
    /// Deny commands carrying an explicit mutating HTTP method token.
    ReadOnlyHttp,
}

/// Where and how commands run: mode, working directory, injected env.
#[derive(Debug, Clone)]
pub struct SandboxPolicy {
    pub mode: PolicyMode,
    pub workdir: PathBuf,
    pub env: BTreeMap<String, String>,
}

impl SandboxPolicy {
    pub fn unrestricted(workdir: impl Into<PathBuf>) -> Self {
        SandboxPolicy {
            mode: PolicyMode::Unrestricted,
            workdir: workdir.into(),
            env: BTreeMap::new(),
        }
    }

    pub fn read_only_http(workdir: impl Into<PathBuf>) -> Self {
        SandboxPolicy {
            mode: PolicyMode::ReadOnlyHttp,
            workdir: workdir.into(),
            ..Self::unrestricted("")
        }
    }

    pub fn with_env(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.env.insert(name.into(), value.into());
        self
    }
}

/// Result of a pre-execution policy check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyDecision {
    Allow,
    Deny(String),
}

/// Errors that prevent a command from running at all.
///
/// A timeout is NOT an error — it is an [`ExecResult`] with
/// `timed_out = true` and a `[error] Command timed out after Ns.` stderr line.
#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("workdir does not exist: {0}")]
    WorkdirMissing(PathBuf),
    #[error("failed to spawn command: {0}")]
    Spawn(#[from] std::io::Error),
}

/// One sandbox per episode; runs one command at a time.
#[derive(Debug, Clone)]
pub struct Sandbox {
    pub policy: SandboxPolicy,
    pub limits: ExecLimits,
}

impl Sandbox {
    pub fn new(policy: SandboxPolicy, limits: ExecLimits) -> Result<Self, SandboxError> {
        if !policy.workdir.is_dir() {
            return Err(SandboxError::WorkdirMissing(policy.workdir.clone()));
        }
        Ok(Sandbox { policy, limits })
    }

    pub fn with_defaults(workdir: impl Into<PathBuf>) -> Result<Self, SandboxError> {
        Self::new(SandboxPolicy::unrestricted(workdir), ExecLimits::default())
    }

    pub fn workdir(&self) -> &Path {
        &self.policy.workdir
    }

    /// Run `command` under `sh -c` with the sandbox's limits and env.
    pub fn execute(&self, command: &str) -> Result<ExecResult, SandboxError> {
        execute(command, &self.policy, &self.limits)
    }

    /// Check `command` against this sandbox's policy mode.
    pub fn check(&self, command: &str) -> PolicyDecision {
        check_policy(command, &self.policy)
    }
}

/// Lexical request-method policy check.
///
/// In [`PolicyMode::ReadOnlyHttp`], any explicit `-X`/`--request`
/// POST/PUT/PATCH/DELETE token (case-insensitive) is denied; GETs and
/// method-less commands pass. Unrestricted mode always allows.
pub fn check_policy(command: &str, policy: &SandboxPolicy) -> PolicyDecision {
    match policy.mode {
        PolicyMode::Unrestricted => PolicyDecision::Allow,
        PolicyMode::ReadOnlyHttp => {
            if mutating_method_regex().is_match(command) {
                PolicyDecision::Deny(READ_ONLY_DENY_REASON.to_string())
            } else {
                PolicyDecision::Allow
            }
        }
    }
}

fn mutating_method_regex() -> &'static regex::Regex {
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    RE.get_or_init(|| {
        regex::Regex::new(r#"(?i)(-X|--request)[\s=]*['"]?(POST|PUT|PATCH|DELETE)\b"#).unwrap()
    })
}

/// Execute one command; see [`Sandbox::execute`].
pub fn execute(
    command: &str,
    policy: &SandboxPolicy,
    limits: &ExecLimits,
) -> Result<ExecResult, SandboxError> {
    if !policy.workdir.is_dir() {
        return Err(SandboxError::WorkdirMissing(policy.workdir.clone()));
    }
    let start = Instant::now();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .current_dir(&policy.workdir)
        .envs(&policy.env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()?;

    let cap = limits.max_output_bytes + 1;
    let stdout_reader = spawn_capped_reader(child.stdout.take().expect("stdout piped"), cap);
    let stderr_reader = spawn_capped_reader(child.stderr.take().expect("stderr piped"), cap);

    let deadline = start + Duration::from_secs(limits.timeout_secs);
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            timed_out = true;
            // SIGKILL the whole process group so pipeline children die too.
            unsafe {
                libc::kill(-(child.id() as i32), libc::SIGKILL);
            }
            break child.wait()?;
        }
        std::thread::sleep(Duration::from_millis(5));
    };

    let stdout_bytes = stdout_reader.join().expect("stdout reader panicked");
    let stderr_bytes = stderr_reader.join().expect("stderr reader panicked");
    let duration_secs = start.elapsed().as_secs_f64();

    let (mut stdout, mut stderr, truncated) =
        truncate_streams(&stdout_bytes, &stderr_bytes, limits.max_output_bytes);

    let exit_code = if timed_out {
        TIMEOUT_EXIT_CODE
    } else {
        status
            .code()
            .or_else(|| status.signal().map(|s| 128 + s))
            .unwrap_or(-1)
    };

    if timed_out {
        if !stderr.is_empty() && !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        stderr.push_str(&format!(
            "[error] Command timed out after {}s.",
            limits.timeout_secs
        ));
        // The kill may race a final write; the flag is authoritative.
        let _ = &mut stdout;
    }

    Ok(ExecResult {
        stdout,
        stderr,
        exit_code,
        duration_secs,
        truncated,
        timed_out,
    })
}

/// Drain a pipe to EOF on a thread, retaining only the first `cap` bytes.
fn spawn_capped_reader<R: Read + Send + 'static>(
    mut reader: R,
    cap: usize,
) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut retained = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(retained.len());
                    retained.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        retained
    })
}

/// Truncate the combined (stdout ++ stderr) rendering to `max` bytes.
///
/// The cut lands on a char boundary after lossy UTF-8 conversion; the marker
/// goes at the end of whichever stream holds the cut, so the combined output
/// always ends with it when `truncated` is true.
fn truncate_streams(stdout: &[u8], stderr: &[u8], max: usize) -> (String, String, bool) {
    let out = String::from_utf8_lossy(stdout).into_owned();
    let err = String::from_utf8_lossy(stderr).into_owned();
    if out.len() + err.len() <= max {
        return (out, err, false);
    }
    if out.len() >= max {
        return (truncate_at_boundary(&out, max) + TRUNCATION_MARKER, String::new(), true);
    }
    let room = max - out.len();
    (out, truncate_at_boundary(&err, room) + TRUNCATION_MARKER, true)
}

fn truncate_at_boundary(s: &str, mut at: usize) -> String {
    while at > 0 && !s.is_char_boundary(at) {
        at -= 1;
    }
    s[..at].to_string()
}

/// Render an [`ExecResult`] as the single observation string the model sees.
///
/// Stdout then stderr (one terminal), `[no output]` when both are empty, and
/// the exit code appended when nonzero.
pub fn render_observation(result: &ExecResult) -> String {
    let mut s = String::with_capacity(result.stdout.len() + result.stderr.len() + 24);
    s.push_str(&result.stdout);
    if !result.stderr.is_empty() {
        if !s.is_empty() && !s.ends_with('\n') {
            s.push('\n');
        }
        s.push_str(&result.stderr);
    }
    if s.trim().is_empty() {
        s = NO_OUTPUT.to_string();
    }
    if result.exit_code != 0 {
        s.push_str(&format!("\n[exit code: {}]", result.exit_code));
    }
    s
}
