//! Runs a planner executable as a resource-limited child process and
//! classifies the outcome.

use std::io::Read;
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use gmp_core::planner::{exit, ResultJson};
use gmp_core::{validate_plan, MedicationProblem, Plan, SearchStatus, Verdict};
use serde::{Deserialize, Serialize};

use crate::error::ForgeError;
use crate::template::CompiledPlanner;

/// Extra wall time granted past the slice before the child is killed.
pub const KILL_GRACE: Duration = Duration::from_millis(500);
/// Address-space headroom on top of the cap for code, stacks and the allocator.
const ADDRESS_SPACE_HEADROOM: u64 = 256 * 1024 * 1024;
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Classification {
    Success,
    CompileError,
    #[serde(rename = "OOM")]
    Oom,
    RuntimeError,
    Timeout,
}

impl Classification {
    pub const ALL: [Classification; 5] = [
        Classification::Success,
        Classification::CompileError,
        Classification::Oom,
        Classification::RuntimeError,
        Classification::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Success => "Success",
            Classification::CompileError => "CompileError",
            Classification::Oom => "OOM",
            Classification::RuntimeError => "RuntimeError",
            Classification::Timeout => "Timeout",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Classification::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown classification `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptOutcome {
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub compile_time_s: f64,
    pub run_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

impl AttemptOutcome {
    pub fn compile_error(compile_time_s: f64, diagnostics: impl Into<String>) -> Self {
        AttemptOutcome {
            classification: Classification::CompileError,
            result: None,
            verdict: None,
            compile_time_s,
            run_time_s: 0.0,
            exit_code: None,
            detail: diagnostics.into(),
        }
    }

    /// Validated plan of a successful attempt.
    pub fn plan(&self, problem: &MedicationProblem) -> Option<Plan> {
        if self.classification != Classification::Success {
            return None;
        }
        self.result.as_ref().and_then(|r| r.to_plan(problem))
    }
}

/// Caps the child's address space and puts it in its own process group, so
/// a kill also reaches anything it spawned.
#[cfg(unix)]
fn confine(cmd: &mut Command, memory_cap: u64) {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0);
    let Some(limit) = memory_cap.checked_add(ADDRESS_SPACE_HEADROOM) else {
        return;
    };
    let rlim = libc::rlimit {
        rlim_cur: limit as libc::rlim_t,
        rlim_max: limit as libc::rlim_t,
    };
    // SAFETY: setrlimit is async-signal-safe and touches no parent state.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setrlimit(libc::RLIMIT_AS, &rlim) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn confine(_: &mut Command, _: u64) {}

fn kill_tree(child: &mut Child) -> std::io::Result<()> {
    #[cfg(unix)]
    // SAFETY: signals the process group created for this child only.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
    let _ = child.kill();
    child.wait().map(|_| ())
}

fn child_rss(pid: u32) -> Option<u64> {
    let status = std::fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut out = String::new();
        if let Some(mut p) = pipe {
            let mut buf = Vec::new();
            let _ = p.read_to_end(&mut buf);
            out = String::from_utf8_lossy(&buf).into_owned();
        }
        out
    })
}

enum Ending {
    Exited(ExitStatus),
    KilledForTime,
    KilledForMemory(u64),
}

fn supervise(child: &mut Child, deadline: Duration, memory_cap: u64, started: Instant) -> std::io::Result<Ending> {
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Ending::Exited(status));
        }
        if started.elapsed() >= deadline {
            kill_tree(child)?;
            return Ok(Ending::KilledForTime);
        }
        if let Some(rss) = child_rss(child.id()) {
            if rss > memory_cap {
                kill_tree(child)?;
                return Ok(Ending::KilledForMemory(rss));
            }
        }
        thread::sleep(POLL);
    }
}

fn allocation_failure(stderr: &str) -> bool {
    stderr.contains("memory allocation of") || stderr.contains("capacity overflow")
}

/// Runs `planner` on one instance. The child gets `time_slice` of its own
/// search time plus a short grace period before it is killed.
pub fn run_planner(
    planner: &CompiledPlanner,
    problem: &MedicationProblem,
    instance_path: &Path,
    time_slice: Duration,
    memory_cap: u64,
) -> Result<AttemptOutcome, ForgeError> {
    let mut cmd = Command::new(&planner.executable);
    cmd.arg(instance_path)
        .arg("--time-slice")
        .arg(format!("{}", time_slice.as_secs_f64()))
        .arg("--memory-cap")
        .arg(memory_cap.to_string())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    confine(&mut cmd, memory_cap);

    let started = Instant::now();
    let mut child = cmd
        .spawn()
        .map_err(|e| ForgeError::Spawn(format!("{}: {e}", planner.executable.display())))?;
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());
    let ending = supervise(&mut child, time_slice + KILL_GRACE, memory_cap, started)?;
    let run_time_s = started.elapsed().as_secs_f64();
    let stdout = stdout.join().unwrap_or_default();
    let stderr = stderr.join().unwrap_or_default();

    let mut outcome = AttemptOutcome {
        classification: Classification::RuntimeError,
        result: None,
        verdict: None,
        compile_time_s: 0.0,
        run_time_s,
        exit_code: None,
        detail: String::new(),
    };
    let status = match ending {
        Ending::KilledForTime => {
            outcome.classification = Classification::Timeout;
            outcome.detail = format!("killed after {run_time_s:.2} s");
            return Ok(outcome);
        }
        Ending::KilledForMemory(rss) => {
            outcome.classification = Classification::Oom;
            outcome.detail = format!("killed at resident set {rss} bytes");
            return Ok(outcome);
        }
        Ending::Exited(status) => status,
    };
    outcome.exit_code = status.code();
    outcome.result = stdout
        .lines()
        .rev()
        .find_map(|line| serde_json::from_str::<ResultJson>(line).ok());

    outcome.classification = match (status.code(), &outcome.result) {
        (Some(exit::SOLVED), Some(r)) if r.status == SearchStatus::Solved => match r.to_plan(problem) {
            Some(plan) => match validate_plan(problem, &plan) {
                Ok(v) if v.valid => {
                    outcome.verdict = Some(v);
                    Classification::Success
                }
                Ok(v) => {
                    outcome.detail = format!("plan rejected by validator: {:?}", v.failure);
                    outcome.verdict = Some(v);
                    Classification::RuntimeError
                }
                Err(e) => {
                    outcome.detail = e.to_string();
                    Classification::RuntimeError
                }
            },
            None => Classification::RuntimeError,
        },
        (Some(exit::TIMEOUT), _) => Classification::Timeout,
        (Some(exit::OUT_OF_MEMORY), _) => Classification::Oom,
        _ if allocation_failure(&stderr) => Classification::Oom,
        (Some(exit::EXHAUSTED), _) => {
            outcome.detail = "search space exhausted without a plan".into();
            Classification::RuntimeError
        }
        _ => Classification::RuntimeError,
    };
    if outcome.detail.is_empty() && outcome.classification != Classification::Success {
        outcome.detail = match &outcome.result {
            Some(r) => r.detail.clone().unwrap_or_else(|| r.status.as_str().to_string()),
            None => tail(&stderr, 2000),
        };
    }
    Ok(outcome)
}

fn tail(s: &str, max: usize) -> String {
    let start = s.len().saturating_sub(max);
    let start = (start..=s.len()).find(|i| s.is_char_boundary(*i)).unwrap_or(s.len());
    s[start..].to_string()
}
