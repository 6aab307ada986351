//! Standalone planner entry point and its JSON result format.
//!
//! Every planner executable, built-in or compiled around a generated
//! heuristic, is invoked as
//!
//! ```text
//! planner <instance.gmp.json> [--time-slice SECONDS] [--memory-cap BYTES]
//! ```
//!
//! and prints one result object on stdout:
//!
//! ```json
//! {"status": "solved", "plan": [["A", 4, 0]], "makespan": 3, "cost": 4,
//!  "expanded": 12, "generated": 30, "duplicates": 2, "wall_time_s": 0.01}
//! ```
//!
//! `plan` lists administrations only; the waits between them are implied by
//! the timesteps and `makespan`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::heuristics::Heuristic;
use crate::model::{parse_problem, Dosage, MedicationProblem, PatientState, Plan, Timestep};
use crate::search::{gbfs, SearchLimits, SearchResult, SearchStatus, DEFAULT_MEMORY_CAP};
use crate::validator::PlanError;

/// Exit codes of planner executables.
pub mod exit {
    pub const SOLVED: i32 = 0;
    pub const EXHAUSTED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const TIMEOUT: i32 = 3;
    pub const OUT_OF_MEMORY: i32 = 4;
    pub const HEURISTIC_FAILURE: i32 = 5;
    pub const BAD_INSTANCE: i32 = 6;
}

pub fn exit_code(status: SearchStatus) -> i32 {
    match status {
        SearchStatus::Solved => exit::SOLVED,
        SearchStatus::Exhausted => exit::EXHAUSTED,
        SearchStatus::Timeout => exit::TIMEOUT,
        SearchStatus::OutOfMemory => exit::OUT_OF_MEMORY,
        SearchStatus::HeuristicFailure => exit::HEURISTIC_FAILURE,
    }
}

/// Default per-run slice for planner executables, in seconds.
pub const DEFAULT_TIME_SLICE_S: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub status: SearchStatus,
    pub plan: Vec<(String, Dosage, Timestep)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub makespan: Option<Timestep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<usize>,
    pub expanded: u64,
    pub generated: u64,
    #[serde(default)]
    pub duplicates: u64,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ResultJson {
    pub fn from_search(result: &SearchResult) -> Self {
        ResultJson {
            status: result.status,
            plan: result.plan.as_ref().map(Plan::administrations).unwrap_or_default(),
            makespan: result.plan.as_ref().map(|p| p.makespan),
            cost: result.plan.as_ref().map(Plan::cost),
            expanded: result.expanded,
            generated: result.generated,
            duplicates: result.duplicates,
            wall_time_s: result.wall_time_used,
            detail: result.detail.clone(),
        }
    }

    /// Full plan with implied waits, when the run solved the instance.
    pub fn to_plan(&self, problem: &MedicationProblem) -> Option<Plan> {
        (self.status == SearchStatus::Solved).then(|| {
            let makespan = self
                .makespan
                .unwrap_or_else(|| earliest_clearance(problem, &self.plan));
            Plan::from_administrations(&self.plan, makespan)
        })
    }
}

/// First timestep at which every listed dose has been eliminated.
pub fn earliest_clearance(problem: &MedicationProblem, admins: &[(String, Dosage, Timestep)]) -> Timestep {
    admins
        .iter()
        .map(|(m, _, t)| (t + problem.decay(m)).max(*t))
        .max()
        .unwrap_or(0)
}

/// Reads a plan file: either a bare list of `[medicine, dosage, timestep]`
/// triples or an object with a `plan` list and optional `makespan`, such as a
/// planner result. Without a makespan the plan ends when the last dose clears.
pub fn parse_plan_json(problem: &MedicationProblem, text: &str) -> Result<Plan, PlanError> {
    let value: Value = serde_json::from_str(text).map_err(|e| PlanError::Malformed(e.to_string()))?;
    let (list, makespan) = match &value {
        Value::Array(_) => (value.clone(), None),
        Value::Object(obj) => {
            let list = obj
                .get("plan")
                .cloned()
                .ok_or_else(|| PlanError::Malformed("missing `plan` field".into()))?;
            let makespan = match obj.get("makespan") {
                None | Some(Value::Null) => None,
                Some(v) => Some(
                    v.as_i64()
                        .ok_or_else(|| PlanError::Malformed("`makespan` must be an integer".into()))?,
                ),
            };
            (list, makespan)
        }
        _ => return Err(PlanError::Malformed("expected a list or an object".into())),
    };
    let admins: Vec<(String, Dosage, Timestep)> =
        serde_json::from_value(list).map_err(|e| PlanError::Malformed(format!("plan entries: {e}")))?;
    let makespan = makespan.unwrap_or_else(|| earliest_clearance(problem, &admins));
    Ok(Plan::from_administrations(&admins, makespan))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerArgs {
    pub instance: PathBuf,
    pub time_slice_s: f64,
    pub memory_cap: u64,
}

pub fn parse_planner_args<I: IntoIterator<Item = String>>(args: I) -> Result<PlannerArgs, String> {
    let mut instance = None;
    let mut time_slice_s = DEFAULT_TIME_SLICE_S;
    let mut memory_cap = DEFAULT_MEMORY_CAP;
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--time-slice" => {
                let v = it.next().ok_or("--time-slice needs a value")?;
                time_slice_s = v.parse().map_err(|_| format!("bad --time-slice `{v}`"))?;
            }
            "--memory-cap" => {
                let v = it.next().ok_or("--memory-cap needs a value")?;
                memory_cap = v.parse().map_err(|_| format!("bad --memory-cap `{v}`"))?;
            }
            flag if flag.starts_with("--") => return Err(format!("unknown flag `{flag}`")),
            path => {
                if instance.replace(PathBuf::from(path)).is_some() {
                    return Err("more than one instance path given".into());
                }
            }
        }
    }
    Ok(PlannerArgs {
        instance: instance.ok_or("missing instance path")?,
        time_slice_s,
        memory_cap,
    })
}

pub fn solve_file(args: &PlannerArgs, heuristic: &dyn Heuristic) -> Result<SearchResult, String> {
    let text = std::fs::read_to_string(&args.instance)
        .map_err(|e| format!("cannot read {}: {e}", args.instance.display()))?;
    let problem = parse_problem(&text).map_err(|e| e.to_string())?;
    let limits = SearchLimits::new(args.time_slice_s, args.memory_cap)?;
    Ok(gbfs(&problem, heuristic, limits))
}

/// `main` body for a planner executable. Returns the process exit code.
pub fn run_cli(heuristic: fn(&MedicationProblem, &PatientState) -> f64) -> i32 {
    let args = match parse_planner_args(std::env::args().skip(1)) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("usage: planner <instance.gmp.json> [--time-slice S] [--memory-cap BYTES]\n{e}");
            return exit::USAGE;
        }
    };
    match solve_file(&args, &heuristic) {
        Ok(result) => {
            let json = serde_json::to_string(&ResultJson::from_search(&result))
                .expect("result is serializable");
            println!("{json}");
            exit_code(result.status)
        }
        Err(e) => {
            eprintln!("{e}");
            exit::BAD_INSTANCE
        }
    }
}
