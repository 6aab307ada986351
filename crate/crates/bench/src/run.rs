//! Runs planner configurations over a suite and writes the results table.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use gmp_core::{gbfs, parse_problem, validate_plan, HeuristicKind, MedicationProblem, SearchLimits, SearchStatus};
use gmp_forge::{run_planner, Classification, CompiledPlanner};
use serde::{Deserialize, Serialize};

pub const DEFAULT_WORKERS: usize = 20;
pub const RESULT_COLUMNS: [&str; 7] = ["suite", "instance", "config", "status", "cost", "wall_time_s", "expanded"];
pub const COVERAGE_COLUMNS: [&str; 5] = ["suite", "config", "solved", "total", "total_time_s"];

#[derive(Debug, Clone)]
pub enum PlannerConfig {
    Builtin(HeuristicKind),
    /// A compiled planner executable, run as a child process.
    External { name: String, planner: CompiledPlanner },
}

impl PlannerConfig {
    pub fn name(&self) -> &str {
        match self {
            PlannerConfig::Builtin(k) => k.id(),
            PlannerConfig::External { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub suite: String,
    pub instance: String,
    pub config: String,
    /// A search status (`solved`, `timeout`, ...), `runtime_error`, or
    /// `invalid_plan` when a returned plan fails validation.
    pub status: String,
    pub cost: Option<usize>,
    pub wall_time_s: f64,
    pub expanded: Option<u64>,
}

impl RunRecord {
    pub fn solved(&self) -> bool {
        self.status == SearchStatus::Solved.as_str()
    }
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub id: String,
    pub path: PathBuf,
}

/// Every `*.gmp.json` file in `dir`, sorted by name.
pub fn discover(dir: &Path) -> std::io::Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(id) = name.strip_suffix(".gmp.json") {
            out.push(SuiteEntry { id: id.to_string(), path: path.clone() });
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub limits: SearchLimits,
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            limits: SearchLimits::default(),
            workers: DEFAULT_WORKERS,
        }
    }
}

fn failed(suite: &str, id: &str, config: &str, status: &str) -> RunRecord {
    RunRecord {
        suite: suite.into(),
        instance: id.into(),
        config: config.into(),
        status: status.into(),
        cost: None,
        wall_time_s: 0.0,
        expanded: None,
    }
}

fn run_builtin(suite: &str, id: &str, problem: &MedicationProblem, kind: HeuristicKind, limits: SearchLimits) -> RunRecord {
    let h = kind.evaluator();
    let r = gbfs(problem, h.as_ref(), limits);
    let mut rec = RunRecord {
        suite: suite.into(),
        instance: id.into(),
        config: kind.id().into(),
        status: r.status.as_str().into(),
        cost: None,
        wall_time_s: r.wall_time_used,
        expanded: Some(r.expanded),
    };
    if let Some(plan) = r.plan.filter(|_| r.status == SearchStatus::Solved) {
        if validate_plan(problem, &plan).is_ok_and(|v| v.valid) {
            rec.cost = Some(plan.cost());
        } else {
            rec.status = "invalid_plan".into();
        }
    }
    rec
}

fn run_external(
    suite: &str,
    entry: &SuiteEntry,
    problem: &MedicationProblem,
    name: &str,
    planner: &CompiledPlanner,
    limits: SearchLimits,
) -> RunRecord {
    let mut rec = failed(suite, &entry.id, name, "runtime_error");
    let outcome = match run_planner(planner, problem, &entry.path, limits.wall_time, limits.memory_cap) {
        Ok(o) => o,
        Err(_) => return rec,
    };
    rec.wall_time_s = outcome.run_time_s;
    rec.expanded = outcome.result.as_ref().map(|r| r.expanded);
    rec.status = match outcome.classification {
        Classification::Success => {
            rec.cost = outcome.plan(problem).map(|p| p.cost());
            "solved".into()
        }
        Classification::Timeout => "timeout".into(),
        Classification::Oom => "oom".into(),
        Classification::CompileError => "compile_error".into(),
        Classification::RuntimeError => match &outcome.result {
            Some(r) if r.status == SearchStatus::Solved => "invalid_plan".into(),
            Some(r) => r.status.as_str().into(),
            None => "runtime_error".into(),
        },
    };
    rec
}

fn run_one(suite: &str, entry: &SuiteEntry, config: &PlannerConfig, limits: SearchLimits) -> RunRecord {
    let problem = match std::fs::read_to_string(&entry.path)
        .map_err(|e| e.to_string())
        .and_then(|t| parse_problem(&t).map_err(|e| e.to_string()))
    {
        Ok(p) => p,
        Err(_) => return failed(suite, &entry.id, config.name(), "bad_instance"),
    };
    match config {
        PlannerConfig::Builtin(k) => run_builtin(suite, &entry.id, &problem, *k, limits),
        PlannerConfig::External { name, planner } => run_external(suite, entry, &problem, name, planner, limits),
    }
}

/// Runs every configuration on every instance with a pool of `workers`
/// threads. Rows are streamed to `sink` as they finish, from one writer
/// thread; the returned rows are in (config, instance) order.
///
/// Built-in searches run in-process, so with more than one worker their
/// memory caps see the whole process's resident set.
pub fn run_suite(
    suite: &str,
    entries: &[SuiteEntry],
    configs: &[PlannerConfig],
    options: &RunOptions,
    mut sink: Option<&mut ResultWriter>,
) -> csv::Result<Vec<RunRecord>> {
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..entries.len()).map(move |i| (c, i)))
        .collect();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, RunRecord)>();
    let workers = options.workers.clamp(1, jobs.len().max(1));
    let mut slots: Vec<Option<RunRecord>> = vec![None; jobs.len()];
    std::thread::scope(|s| -> csv::Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            s.spawn(move || loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, i)) = jobs.get(j) else { break };
                let rec = run_one(suite, &entries[i], &configs[c], options.limits);
                if tx.send((j, rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (j, rec) in rx {
            if let Some(w) = sink.as_deref_mut() {
                w.write(&rec)?;
            }
            slots[j] = Some(rec);
        }
        Ok(())
    })?;
    Ok(slots.into_iter().flatten().collect())
}

pub struct ResultWriter {
    inner: csv::Writer<Box<dyn Write + Send>>,
}

impl ResultWriter {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        ResultWriter {
            inner: csv::WriterBuilder::new().has_headers(true).from_writer(out),
        }
    }

    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(Box::new(std::fs::File::create(path)?)))
    }

    pub fn write(&mut self, rec: &RunRecord) -> csv::Result<()> {
        self.inner.serialize(rec)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_results(path: &Path, rows: &[RunRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: std::io::Read>(reader: R) -> csv::Result<Vec<RunRecord>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub suite: String,
    pub config: String,
    pub solved: usize,
    pub total: usize,
    /// Wall time summed over all rows of the configuration.
    pub total_time_s: f64,
}

/// Per-(suite, config) coverage, in first-appearance order.
pub fn coverage(rows: &[RunRecord]) -> Vec<CoverageRow> {
    let mut out: Vec<CoverageRow> = Vec::new();
    for r in rows {
        let idx = match out.iter().position(|c| c.suite == r.suite && c.config == r.config) {
            Some(i) => i,
            None => {
                out.push(CoverageRow {
                    suite: r.suite.clone(),
                    config: r.config.clone(),
                    solved: 0,
                    total: 0,
                    total_time_s: 0.0,
                });
                out.len() - 1
            }
        };
        let c = &mut out[idx];
        c.total += 1;
        c.solved += usize::from(r.solved());
        c.total_time_s += r.wall_time_s;
    }
    out
}

pub fn write_coverage(path: &Path, rows: &[CoverageRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_counts_solved_rows() {
        let mk = |i: &str, c: &str, s: &str, t: f64| RunRecord {
            suite: "s".into(),
            instance: i.into(),
            config: c.into(),
            status: s.into(),
            cost: None,
            wall_time_s: t,
            expanded: None,
        };
        let rows = [mk("a", "x", "solved", 1.0), mk("b", "x", "timeout", 2.0), mk("a", "y", "solved", 0.5)];
        let cov = coverage(&rows);
        assert_eq!(cov.len(), 2);
        assert_eq!((cov[0].solved, cov[0].total, cov[0].total_time_s), (1, 2, 3.0));
        assert_eq!((cov[1].solved, cov[1].total), (1, 1));
    }
}
