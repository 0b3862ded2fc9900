//! Sandboxed subprocess execution of candidate programs against test
//! harnesses.
//!
//! Each execution concatenates one candidate's source with one test harness
//! into a single program file inside a fresh scratch directory, runs it
//! under the configured interpreter command, and maps the result onto the
//! pass/fail/error/timeout outcome model: exit 0 within limits is a pass, a
//! nonzero exit from a completed run is a fail, a launch failure or crash
//! signal is an error, and exceeding the wall-clock limit is a timeout.
//!
//! Isolation is process-level, not container-grade: inputs are trusted per
//! the pipeline's threat model. The environment is cleared (PATH is kept so
//! the interpreter resolves, PYTHONHASHSEED is pinned for reproducible
//! candidate output), the working directory is the scratch directory, and on
//! Unix the address space is capped via rlimit. The `network_allowed` flag
//! is recorded policy; it is not enforced by a network namespace.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use codeprobe_core::domain::{
    Candidate, ExecutionOutcome, ExecutionSignature, ExecutionStatus, TestCase,
};
use codeprobe_core::signature::{signature_of, SignatureError};

/// Name of the combined program file inside each scratch directory. The
/// interpreter is invoked with this relative path so captured tracebacks
/// never leak the scratch location.
const PROGRAM_FILE: &str = "program.py";

/// Captured output is truncated to this many bytes.
const CAPTURE_LIMIT: usize = 4096;

/// Grace period between the termination signal and the hard kill.
const KILL_GRACE: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkdirMode {
    /// A fresh scratch directory per execution, deleted on completion.
    EphemeralPerExecution,
}

/// Resource and interpreter policy for candidate execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxPolicy {
    pub time_limit_ms: u64,
    pub memory_limit_mb: u64,
    /// Command template; `{file}` is replaced by the program file path.
    /// Tokens are split on whitespace, no shell is involved.
    pub interpreter_command: String,
    pub network_allowed: bool,
    pub workdir_mode: WorkdirMode,
    /// Root for scratch directories; system temp when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scratch_root: Option<PathBuf>,
}

impl Default for SandboxPolicy {
    fn default() -> Self {
        Self {
            time_limit_ms: 5000,
            memory_limit_mb: 512,
            interpreter_command: "python3 {file}".into(),
            network_allowed: false,
            workdir_mode: WorkdirMode::EphemeralPerExecution,
            scratch_root: None,
        }
    }
}

impl SandboxPolicy {
    pub fn validate(&self) -> Result<(), ExecutorError> {
        if self.time_limit_ms == 0 || self.memory_limit_mb == 0 {
            return Err(ExecutorError::InvalidPolicy(
                "time and memory limits must be positive".into(),
            ));
        }
        self.argv_template().map(|_| ())
    }

    /// Split the command template into argv tokens, requiring a `{file}`
    /// placeholder somewhere.
    fn argv_template(&self) -> Result<Vec<String>, ExecutorError> {
        let tokens: Vec<String> = self
            .interpreter_command
            .split_whitespace()
            .map(str::to_string)
            .collect();
        if tokens.is_empty() {
            return Err(ExecutorError::SandboxUnavailable(
                "interpreter_command is empty".into(),
            ));
        }
        if !tokens.iter().any(|t| t.contains("{file}")) {
            return Err(ExecutorError::SandboxUnavailable(format!(
                "interpreter_command {:?} has no {{file}} placeholder",
                self.interpreter_command
            )));
        }
        Ok(tokens)
    }
}

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("candidate {candidate_id} and test {test_id} belong to different problems")]
    MismatchedProblem {
        candidate_id: String,
        test_id: String,
    },
    #[error("sandbox unavailable: {0}")]
    SandboxUnavailable(String),
    #[error("invalid sandbox policy: {0}")]
    InvalidPolicy(String),
    #[error("parallelism must be >= 1")]
    InvalidParallelism,
}

/// Run one candidate against one test under the policy.
pub fn execute_one(
    candidate: &Candidate,
    test: &TestCase,
    policy: &SandboxPolicy,
) -> Result<ExecutionOutcome, ExecutorError> {
    if candidate.problem_id != test.problem_id {
        return Err(ExecutorError::MismatchedProblem {
            candidate_id: candidate.id.clone(),
            test_id: test.id.clone(),
        });
    }
    policy.validate()?;
    let argv = policy.argv_template()?;

    let WorkdirMode::EphemeralPerExecution = policy.workdir_mode;
    let mut builder = tempfile::Builder::new();
    builder.prefix("codeprobe-exec-");
    let scratch = match &policy.scratch_root {
        Some(root) => {
            std::fs::create_dir_all(root).map_err(|e| {
                ExecutorError::SandboxUnavailable(format!("cannot create scratch root: {e}"))
            })?;
            builder.tempdir_in(root)
        }
        None => builder.tempdir(),
    }
    .map_err(|e| ExecutorError::SandboxUnavailable(format!("cannot create scratch dir: {e}")))?;

    let program = format!("{}\n\n{}\n", candidate.source_code, test.harness_code);
    std::fs::write(scratch.path().join(PROGRAM_FILE), program).map_err(|e| {
        ExecutorError::SandboxUnavailable(format!("cannot write program file: {e}"))
    })?;

    let mut cmd = Command::new(&argv[0]);
    for token in &argv[1..] {
        cmd.arg(token.replace("{file}", PROGRAM_FILE));
    }
    cmd.current_dir(scratch.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_default())
        .env("PYTHONHASHSEED", "0");
    apply_memory_limit(&mut cmd, policy.memory_limit_mb);

    let started = Instant::now();
    let child = match cmd.spawn() {
        Ok(child) => child,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ExecutorError::SandboxUnavailable(format!(
                "interpreter {:?} not found",
                argv[0]
            )));
        }
        Err(e) => {
            // Launch failed for a per-run reason; that is an error outcome,
            // not an unavailable sandbox.
            return Ok(ExecutionOutcome {
                candidate_id: candidate.id.clone(),
                test_id: test.id.clone(),
                status: ExecutionStatus::Error,
                duration_ms: 0,
                captured_output: Some(truncate(&format!("launch failure: {e}"))),
            });
        }
    };

    let (status, output, timed_out) =
        supervise(child, Duration::from_millis(policy.time_limit_ms));
    let elapsed_ms = started.elapsed().as_millis() as u64;
    // Interpreters absolutize script paths in tracebacks; scrub the scratch
    // location so captured output is identical across runs.
    let output = output.replace(&scratch.path().display().to_string(), "<scratch>");

    let (status, duration_ms) = if timed_out {
        (ExecutionStatus::Timeout, elapsed_ms.max(policy.time_limit_ms))
    } else {
        let status = match status {
            Some(s) if s.success() => ExecutionStatus::Pass,
            Some(s) if s.code().is_some() => ExecutionStatus::Fail,
            // Killed by a signal (crash) or unobtainable status.
            _ => ExecutionStatus::Error,
        };
        (status, elapsed_ms)
    };

    Ok(ExecutionOutcome {
        candidate_id: candidate.id.clone(),
        test_id: test.id.clone(),
        status,
        duration_ms,
        captured_output: (!output.is_empty()).then(|| truncate(&output)),
    })
}

/// Wait for the child within the limit, draining both pipes; on timeout send
/// the termination signal, wait out the grace period, then hard-kill.
/// Returns (exit status if obtained, combined output, timed_out).
fn supervise(
    mut child: Child,
    limit: Duration,
) -> (Option<std::process::ExitStatus>, String, bool) {
    let stdout = child.stdout.take();
    let stderr = child.stderr.take();
    let out_thread = std::thread::spawn(move || drain(stdout));
    let err_thread = std::thread::spawn(move || drain(stderr));

    let deadline = Instant::now() + limit;
    let mut status = None;
    let mut timed_out = false;
    loop {
        match child.try_wait() {
            Ok(Some(s)) => {
                status = Some(s);
                break;
            }
            Ok(None) => {
                if Instant::now() >= deadline {
                    timed_out = true;
                    terminate_gracefully(&mut child);
                    break;
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(_) => break,
        }
    }

    let mut output = out_thread.join().unwrap_or_default();
    let err_output = err_thread.join().unwrap_or_default();
    output.push_str(&err_output);
    (status, output, timed_out)
}

fn drain(pipe: Option<impl Read>) -> String {
    let mut buf = Vec::new();
    if let Some(mut pipe) = pipe {
        let _ = pipe.read_to_end(&mut buf);
    }
    String::from_utf8_lossy(&buf).into_owned()
}

#[cfg(unix)]
fn terminate_gracefully(child: &mut Child) {
    let pid = child.id() as i32;
    unsafe {
        libc::kill(pid, libc::SIGTERM);
    }
    let grace_deadline = Instant::now() + KILL_GRACE;
    while Instant::now() < grace_deadline {
        if matches!(child.try_wait(), Ok(Some(_))) {
            return;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let _ = child.kill();
    let _ = child.wait();
}

#[cfg(not(unix))]
fn terminate_gracefully(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

#[cfg(unix)]
fn apply_memory_limit(cmd: &mut Command, limit_mb: u64) {
    use std::os::unix::process::CommandExt;
    let bytes = limit_mb.saturating_mul(1024 * 1024);
    unsafe {
        cmd.pre_exec(move || {
            let limit = libc::rlimit {
                rlim_cur: bytes,
                rlim_max: bytes,
            };
            // Best effort: a failing setrlimit must not block execution.
            libc::setrlimit(libc::RLIMIT_AS, &limit);
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn apply_memory_limit(_cmd: &mut Command, _limit_mb: u64) {}

fn truncate(text: &str) -> String {
    if text.len() <= CAPTURE_LIMIT {
        return text.to_string();
    }
    let mut cut = CAPTURE_LIMIT;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}\n[truncated]", &text[..cut])
}

/// Run the full candidate-by-test matrix for one problem over a bounded
/// worker pool.
///
/// Exactly `|candidates| * |tests|` outcomes come back, sorted by
/// `(candidate_id, test ordinal)`, independent of scheduling order.
pub fn execute_pool(
    candidates: &[Candidate],
    tests: &[TestCase],
    policy: &SandboxPolicy,
    parallelism: usize,
) -> Result<Vec<ExecutionOutcome>, ExecutorError> {
    if parallelism == 0 {
        return Err(ExecutorError::InvalidParallelism);
    }
    policy.validate()?;
    if let Some(first) = candidates.first() {
        for c in candidates {
            if c.problem_id != first.problem_id {
                return Err(ExecutorError::MismatchedProblem {
                    candidate_id: c.id.clone(),
                    test_id: String::new(),
                });
            }
        }
        for t in tests {
            if t.problem_id != first.problem_id {
                return Err(ExecutorError::MismatchedProblem {
                    candidate_id: first.id.clone(),
                    test_id: t.id.clone(),
                });
            }
        }
    }

    let pairs: Vec<(&Candidate, &TestCase)> = candidates
        .iter()
        .flat_map(|c| tests.iter().map(move |t| (c, t)))
        .collect();

    let next = AtomicUsize::new(0);
    let aborted = AtomicBool::new(false);
    let results: Mutex<Vec<(usize, ExecutionOutcome)>> =
        Mutex::new(Vec::with_capacity(pairs.len()));
    let fatal: Mutex<Option<ExecutorError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(pairs.len().max(1)) {
            scope.spawn(|| loop {
                if aborted.load(Ordering::Relaxed) {
                    return;
                }
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some((candidate, test)) = pairs.get(idx) else {
                    return;
                };
                match execute_one(candidate, test, policy) {
                    Ok(outcome) => results.lock().unwrap().push((idx, outcome)),
                    Err(e) => {
                        aborted.store(true, Ordering::Relaxed);
                        fatal.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });

    if let Some(err) = fatal.into_inner().unwrap() {
        return Err(err);
    }
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(idx, _)| *idx);
    let outcomes: Vec<ExecutionOutcome> = results.into_iter().map(|(_, o)| o).collect();
    debug_assert_eq!(outcomes.len(), pairs.len());
    // Pair order is candidate-major over tests in input order; re-sort by
    // ordinal in case the caller's test list is not ordinal-sorted.
    let mut keyed: Vec<(String, u32, ExecutionOutcome)> = outcomes
        .into_iter()
        .map(|o| {
            let ordinal = tests
                .iter()
                .find(|t| t.id == o.test_id)
                .map(|t| t.ordinal)
                .unwrap_or(u32::MAX);
            (o.candidate_id.clone(), ordinal, o)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, _, o)| o).collect())
}

/// Build one candidate's execution signature by joining its outcomes to the
/// suite's ordinals.
pub fn signature_for(
    candidate_id: &str,
    outcomes: &[ExecutionOutcome],
    tests: &[TestCase],
) -> Result<ExecutionSignature, SignatureError> {
    let pairs: Vec<(u32, ExecutionStatus)> = outcomes
        .iter()
        .filter(|o| o.candidate_id == candidate_id)
        .filter_map(|o| {
            tests
                .iter()
                .find(|t| t.id == o.test_id)
                .map(|t| (t.ordinal, o.status))
        })
        .collect();
    signature_of(&pairs, tests.len())
}
