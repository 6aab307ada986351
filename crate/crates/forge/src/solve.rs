//! The generate → compile → run retry loop.
//!
//! Time is accounted as generation latency + compile time + run time per
//! attempt. The loop stops at the first validated plan, when the accounted
//! time reaches the budget, or after an optional generation cap. Each run
//! gets `min(time_slice, remaining budget)`.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use gmp_core::planner::ResultJson;
use gmp_core::{gbfs, parse_problem, ComprehensiveHeuristic, MedicationProblem, SearchLimits};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ForgeError;
use crate::generator::{GenerationRecord, HeuristicGenerator};
use crate::prompt::PromptBundle;
use crate::runner::{run_planner, AttemptOutcome, Classification};
use crate::template::{compile_planner, BuildOptions, CompileReport, CompileResult, CompiledPlanner};

pub trait PlannerBackend {
    fn compile(&mut self, code: &str) -> Result<CompileReport, ForgeError>;

    fn run(
        &mut self,
        planner: &CompiledPlanner,
        problem: &MedicationProblem,
        instance: &Path,
        time_slice: Duration,
        memory_cap: u64,
    ) -> Result<AttemptOutcome, ForgeError>;
}

/// Real backend: cargo builds and child processes.
#[derive(Debug, Clone)]
pub struct CargoBackend {
    pub workspace: PathBuf,
    pub options: BuildOptions,
}

impl PlannerBackend for CargoBackend {
    fn compile(&mut self, code: &str) -> Result<CompileReport, ForgeError> {
        compile_planner(code, &self.workspace, &self.options)
    }

    fn run(
        &mut self,
        planner: &CompiledPlanner,
        problem: &MedicationProblem,
        instance: &Path,
        time_slice: Duration,
        memory_cap: u64,
    ) -> Result<AttemptOutcome, ForgeError> {
        run_planner(planner, problem, instance, time_slice, memory_cap)
    }
}

/// Backend that never builds anything. The heuristic source carries
/// directives that pick the outcome and its charged durations:
///
/// ```text
/// // compile: fail 3.0
/// // compile: ok 2.0
/// // run: Success 5.0
/// // run: OOM 40.0
/// ```
///
/// `Success` runs are backed by a real in-process search with the
/// comprehensive heuristic, so their plans are genuine. A run directive's
/// time is capped at the slice, and a run cut short by the slice becomes
/// `Timeout`.
#[derive(Debug, Default)]
pub struct SimulatedBackend {
    sources: HashMap<String, String>,
}

fn directive<'c>(code: &'c str, key: &str) -> Option<(&'c str, f64)> {
    code.lines().find_map(|l| {
        let rest = l.trim().strip_prefix("//")?.trim().strip_prefix(key)?.strip_prefix(':')?;
        let mut parts = rest.split_whitespace();
        let word = parts.next()?;
        let secs = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
        Some((word, secs))
    })
}

impl PlannerBackend for SimulatedBackend {
    fn compile(&mut self, code: &str) -> Result<CompileReport, ForgeError> {
        let (verdict, secs) = directive(code, "compile").unwrap_or(("ok", 0.0));
        let result = if verdict == "fail" {
            CompileResult::Failed {
                diagnostics: "error: simulated compile failure".into(),
            }
        } else {
            let digest = format!("sim{}", self.sources.len());
            self.sources.insert(digest.clone(), code.to_string());
            CompileResult::Built(CompiledPlanner {
                executable: PathBuf::from("/simulated").join(&digest),
                source_digest: digest,
            })
        };
        Ok(CompileReport {
            result,
            compile_time_s: secs,
        })
    }

    fn run(
        &mut self,
        planner: &CompiledPlanner,
        problem: &MedicationProblem,
        _: &Path,
        time_slice: Duration,
        memory_cap: u64,
    ) -> Result<AttemptOutcome, ForgeError> {
        let code = self
            .sources
            .get(&planner.source_digest)
            .ok_or_else(|| ForgeError::Spawn(format!("unknown planner {}", planner.source_digest)))?;
        let (word, secs) = directive(code, "run").unwrap_or(("Success", 0.0));
        let mut class: Classification = word.parse().map_err(ForgeError::Config)?;
        let slice = time_slice.as_secs_f64();
        if secs > slice {
            class = Classification::Timeout;
        }
        let mut outcome = AttemptOutcome {
            classification: class,
            result: None,
            verdict: None,
            compile_time_s: 0.0,
            run_time_s: secs.min(slice),
            exit_code: None,
            detail: "simulated".into(),
        };
        if class == Classification::Success {
            let limits = SearchLimits::new(slice.max(1.0), memory_cap).map_err(ForgeError::Config)?;
            let r = gbfs(problem, &ComprehensiveHeuristic, limits);
            let json = ResultJson::from_search(&r);
            match json.to_plan(problem).map(|p| gmp_core::validate_plan(problem, &p)) {
                Some(Ok(v)) if v.valid => outcome.verdict = Some(v),
                _ => outcome.classification = Classification::RuntimeError,
            }
            outcome.result = Some(json);
        }
        Ok(outcome)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoConfig {
    /// Overall wall time and memory cap for the whole loop.
    pub budget: SearchLimits,
    pub time_slice: Duration,
    /// Stop after this many generations even if budget remains.
    pub max_generations: Option<u32>,
    /// Directory for per-instance JSON-lines audit logs.
    pub audit_dir: Option<PathBuf>,
}

impl Default for AutoConfig {
    fn default() -> Self {
        AutoConfig {
            budget: SearchLimits::default(),
            time_slice: Duration::from_secs_f64(gmp_core::planner::DEFAULT_TIME_SLICE_S),
            max_generations: None,
            audit_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub index: u32,
    pub instance: String,
    pub prompt: PromptBundle,
    pub generation: GenerationRecord,
    pub outcome: AttemptOutcome,
    /// Accounted time since the loop started, after this attempt.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub generations: u32,
    pub compile_failures: u32,
    pub runs: u32,
    pub counts: BTreeMap<Classification, u32>,
}

impl Ledger {
    pub fn record(&mut self, class: Classification) {
        self.generations += 1;
        if class == Classification::CompileError {
            self.compile_failures += 1;
        } else {
            self.runs += 1;
        }
        *self.counts.entry(class).or_default() += 1;
    }

    /// Share of attempts per outcome class; sums to 1 when any attempt ran.
    pub fn rates(&self) -> BTreeMap<Classification, f64> {
        Classification::ALL
            .into_iter()
            .map(|c| {
                let n = self.counts.get(&c).copied().unwrap_or(0);
                let rate = if self.generations == 0 {
                    0.0
                } else {
                    f64::from(n) / f64::from(self.generations)
                };
                (c, rate)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Solved,
    BudgetExhausted,
    GenerationLimit,
    EndpointError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub instance: String,
    pub stop: StopReason,
    pub result: Option<ResultJson>,
    pub attempts: Vec<AttemptRecord>,
    pub ledger: Ledger,
    pub elapsed_s: f64,
}

#[derive(Debug, Error)]
pub enum AutoSolveError {
    #[error("budget exhausted after {} attempt(s)", .0.attempts.len())]
    BudgetExhausted(Box<SolveReport>),
    #[error("generation limit reached after {} attempt(s)", .0.attempts.len())]
    GenerationLimit(Box<SolveReport>),
    #[error("{source}")]
    Endpoint {
        source: ForgeError,
        report: Box<SolveReport>,
    },
    #[error("cannot load instance: {0}")]
    Instance(String),
    #[error(transparent)]
    Forge(#[from] ForgeError),
}

impl AutoSolveError {
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            AutoSolveError::BudgetExhausted(r) | AutoSolveError::GenerationLimit(r) => Some(r),
            AutoSolveError::Endpoint { report, .. } => Some(report),
            _ => None,
        }
    }
}

fn instance_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".gmp.json")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(&name)
        .to_string()
}

fn append_audit(dir: &Path, instance: &str, record: &AttemptRecord) -> Result<(), ForgeError> {
    std::fs::create_dir_all(dir)?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(format!("{instance}.jsonl")))?;
    let line = serde_json::to_string(record).map_err(|e| ForgeError::Config(e.to_string()))?;
    // One write per line keeps concurrent appenders from interleaving.
    f.write_all(format!("{line}\n").as_bytes())?;
    Ok(())
}

pub fn auto_solve(
    problem_path: &Path,
    prompt: &PromptBundle,
    generator: &mut dyn HeuristicGenerator,
    backend: &mut dyn PlannerBackend,
    config: &AutoConfig,
) -> Result<SolveReport, AutoSolveError> {
    let text = std::fs::read_to_string(problem_path)
        .map_err(|e| AutoSolveError::Instance(format!("{}: {e}", problem_path.display())))?;
    let problem = parse_problem(&text).map_err(|e| AutoSolveError::Instance(e.to_string()))?;
    let budget = config.budget.wall_time.as_secs_f64();
    let mut report = SolveReport {
        instance: instance_id(problem_path),
        stop: StopReason::BudgetExhausted,
        result: None,
        attempts: Vec::new(),
        ledger: Ledger::default(),
        elapsed_s: 0.0,
    };

    loop {
        if report.elapsed_s >= budget {
            report.stop = StopReason::BudgetExhausted;
            return Err(AutoSolveError::BudgetExhausted(Box::new(report)));
        }
        if config.max_generations.is_some_and(|cap| report.ledger.generations >= cap) {
            report.stop = StopReason::GenerationLimit;
            return Err(AutoSolveError::GenerationLimit(Box::new(report)));
        }

        let generation = match generator.generate(prompt) {
            Ok(g) => g,
            Err(source) => {
                report.stop = StopReason::EndpointError;
                return Err(AutoSolveError::Endpoint {
                    source,
                    report: Box::new(report),
                });
            }
        };
        report.elapsed_s += generation.latency_s;

        let outcome = match &generation.code {
            None => AttemptOutcome::compile_error(0.0, "no code block in response"),
            Some(code) => {
                let compiled = backend.compile(code)?;
                report.elapsed_s += compiled.compile_time_s;
                match compiled.result {
                    CompileResult::Failed { diagnostics } => {
                        AttemptOutcome::compile_error(compiled.compile_time_s, diagnostics)
                    }
                    CompileResult::Built(planner) => {
                        let remaining = budget - report.elapsed_s;
                        if remaining <= 0.0 {
                            AttemptOutcome {
                                classification: Classification::Timeout,
                                result: None,
                                verdict: None,
                                compile_time_s: compiled.compile_time_s,
                                run_time_s: 0.0,
                                exit_code: None,
                                detail: "budget spent before the run could start".into(),
                            }
                        } else {
                            let slice = config.time_slice.min(Duration::from_secs_f64(remaining));
                            let mut o =
                                backend.run(&planner, &problem, problem_path, slice, config.budget.memory_cap)?;
                            o.compile_time_s = compiled.compile_time_s;
                            report.elapsed_s += o.run_time_s;
                            o
                        }
                    }
                }
            }
        };

        let class = outcome.classification;
        report.ledger.record(class);
        let record = AttemptRecord {
            index: report.ledger.generations,
            instance: report.instance.clone(),
            prompt: prompt.clone(),
            generation,
            outcome,
            elapsed_s: report.elapsed_s,
        };
        if let Some(dir) = &config.audit_dir {
            append_audit(dir, &report.instance, &record)?;
        }
        if class == Classification::Success {
            report.result = record.outcome.result.clone();
            report.attempts.push(record);
            report.stop = StopReason::Solved;
            return Ok(report);
        }
        report.attempts.push(record);
    }
}
