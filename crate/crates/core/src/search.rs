//! Greedy best-first search over patient states.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::heuristics::Heuristic;
use crate::model::{AdministrationAction, Dosage, MedicationProblem, PatientState, Plan, Timestep};
use crate::pkpd::Dynamics;

/// Default wall budget per instance.
pub const DEFAULT_WALL_TIME: Duration = Duration::from_secs(600);
/// 16 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 16 * 1024 * 1024 * 1024;
/// Expansions between resident-set polls.
pub const DEFAULT_MEMORY_POLL_INTERVAL: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLimits {
    pub wall_time: Duration,
    /// Bytes the resident set may grow by after the search starts.
    pub memory_cap: u64,
}

impl SearchLimits {
    pub fn new(wall_time_s: f64, memory_cap: u64) -> Result<Self, String> {
        if !(wall_time_s.is_finite() && wall_time_s > 0.0) {
            return Err(format!("wall time must be positive, got {wall_time_s}"));
        }
        if memory_cap == 0 {
            return Err("memory cap must be positive".to_string());
        }
        Ok(SearchLimits {
            wall_time: Duration::from_secs_f64(wall_time_s),
            memory_cap,
        })
    }
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            wall_time: DEFAULT_WALL_TIME,
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Solved,
    Exhausted,
    Timeout,
    #[serde(rename = "oom")]
    OutOfMemory,
    HeuristicFailure,
}

impl SearchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchStatus::Solved => "solved",
            SearchStatus::Exhausted => "exhausted",
            SearchStatus::Timeout => "timeout",
            SearchStatus::OutOfMemory => "oom",
            SearchStatus::HeuristicFailure => "heuristic_failure",
        }
    }
}

impl std::fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub status: SearchStatus,
    pub plan: Option<Plan>,
    pub expanded: u64,
    pub generated: u64,
    pub duplicates: u64,
    pub wall_time_used: f64,
    /// Why a heuristic failure or resource trip happened.
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub memory_poll_interval: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            memory_poll_interval: DEFAULT_MEMORY_POLL_INTERVAL,
        }
    }
}

/// Identity of a search state: time, full dose history and the set of
/// unlatched goals. Derived property values are excluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct StateKey {
    timestamp: Timestep,
    doses: Vec<(u16, Timestep, Dosage)>,
    goals: Vec<u16>,
}

struct KeyBuilder<'p> {
    problem: &'p MedicationProblem,
}

impl KeyBuilder<'_> {
    fn key(&self, state: &PatientState) -> StateKey {
        let mut doses = Vec::new();
        for (i, m) in self.problem.medicines.iter().enumerate() {
            if let Some(h) = state.medicine_history.get(m) {
                doses.extend(h.iter().map(|&(t, d)| (i as u16, t, d)));
            }
        }
        let goals = self
            .problem
            .goals
            .keys()
            .enumerate()
            .filter(|(_, k)| state.goals_remaining.contains_key(*k))
            .map(|(i, _)| i as u16)
            .collect();
        StateKey {
            timestamp: state.timestamp,
            doses,
            goals,
        }
    }
}

struct Node {
    state: PatientState,
    parent: Option<usize>,
    action: Option<AdministrationAction>,
}

#[derive(PartialEq)]
struct OpenEntry {
    h: f64,
    seq: u64,
    node: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // Reversed so the max-heap pops the smallest h, then the oldest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .h
            .total_cmp(&self.h)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Resident set size of the current process, when the platform exposes it.
pub fn resident_set_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Hands free heap pages back to the OS so the resident set reflects live
/// allocations. A no-op where the allocator offers no such call.
pub fn release_free_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: malloc_trim only returns unused pages; it has no preconditions.
    unsafe {
        libc::malloc_trim(0);
    }
}

fn evaluate(
    heuristic: &dyn Heuristic,
    problem: &MedicationProblem,
    state: &PatientState,
) -> Result<f64, String> {
    match panic::catch_unwind(AssertUnwindSafe(|| heuristic.evaluate(problem, state))) {
        Ok(h) if h.is_finite() => Ok(h),
        Ok(h) => Err(format!("heuristic returned non-finite value {h}")),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic payload".to_string());
            Err(format!("heuristic panicked: {msg}"))
        }
    }
}

fn extract_plan(nodes: &[Node], goal: usize) -> Plan {
    let mut actions = Vec::new();
    let mut cursor = Some(goal);
    while let Some(i) = cursor {
        if let Some(a) = &nodes[i].action {
            actions.push(a.clone());
        }
        cursor = nodes[i].parent;
    }
    actions.reverse();
    Plan {
        actions,
        makespan: nodes[goal].state.timestamp,
    }
}

pub fn gbfs(problem: &MedicationProblem, heuristic: &dyn Heuristic, limits: SearchLimits) -> SearchResult {
    gbfs_with(problem, heuristic, limits, SearchOptions::default())
}

/// Greedy best-first search with FIFO tie-breaking and duplicate detection
/// at generation time. The goal test is applied to every generated state.
pub fn gbfs_with(
    problem: &MedicationProblem,
    heuristic: &dyn Heuristic,
    limits: SearchLimits,
    options: SearchOptions,
) -> SearchResult {
    let start = Instant::now();
    let dynamics = Dynamics::new(problem);
    let keys = KeyBuilder { problem };
    let mut result = SearchResult {
        status: SearchStatus::Exhausted,
        plan: None,
        expanded: 0,
        generated: 1,
        duplicates: 0,
        wall_time_used: 0.0,
        detail: None,
    };
    let finish = |mut r: SearchResult, status: SearchStatus, detail: Option<String>| {
        r.status = status;
        r.detail = detail;
        r.wall_time_used = start.elapsed().as_secs_f64();
        r
    };

    let root = dynamics.initial_state();
    if dynamics.is_dead_end(&root) {
        let why = dynamics.check_constraints(&root).err().map(|v| format!("initial state violates {v}"));
        return finish(result, SearchStatus::Exhausted, why);
    }
    if dynamics.is_goal(&root) {
        result.plan = Some(Plan::default());
        return finish(result, SearchStatus::Solved, None);
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: HashSet<StateKey> = HashSet::new();
    let mut open: BinaryHeap<OpenEntry> = BinaryHeap::new();
    let mut seq = 0_u64;

    let h0 = match evaluate(heuristic, problem, &root) {
        Ok(h) => h,
        Err(e) => return finish(result, SearchStatus::HeuristicFailure, Some(e)),
    };
    seen.insert(keys.key(&root));
    nodes.push(Node {
        state: root,
        parent: None,
        action: None,
    });
    open.push(OpenEntry { h: h0, seq, node: 0 });

    let poll_every = options.memory_poll_interval.max(1);
    release_free_memory();
    let baseline = resident_set_bytes().unwrap_or(0);
    while let Some(entry) = open.pop() {
        if start.elapsed() >= limits.wall_time {
            return finish(result, SearchStatus::Timeout, None);
        }
        if result.expanded % poll_every == 0 {
            if let Some(rss) = resident_set_bytes() {
                let grown = rss.saturating_sub(baseline);
                if grown > limits.memory_cap {
                    let detail = format!("resident set grew by {grown} bytes, over the cap of {}", limits.memory_cap);
                    return finish(result, SearchStatus::OutOfMemory, Some(detail));
                }
            }
        }
        result.expanded += 1;

        let children = dynamics.successors(&nodes[entry.node].state);
        for (action, child) in children {
            result.generated += 1;
            if !seen.insert(keys.key(&child)) {
                result.duplicates += 1;
                continue;
            }
            let goal = dynamics.is_goal(&child);
            let h = if goal {
                0.0
            } else {
                match evaluate(heuristic, problem, &child) {
                    Ok(h) => h,
                    Err(e) => return finish(result, SearchStatus::HeuristicFailure, Some(e)),
                }
            };
            nodes.push(Node {
                state: child,
                parent: Some(entry.node),
                action: Some(action),
            });
            let id = nodes.len() - 1;
            if goal {
                result.plan = Some(extract_plan(&nodes, id));
                return finish(result, SearchStatus::Solved, None);
            }
            seq += 1;
            open.push(OpenEntry { h, seq, node: id });
        }
    }
    finish(result, SearchStatus::Exhausted, None)
}
