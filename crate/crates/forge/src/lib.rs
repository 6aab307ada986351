//! Heuristic forge: asks a chat endpoint for a heuristic, builds a
//! problem-specific planner around it, runs it under limits and retries on
//! failure.

pub mod config;
pub mod error;
pub mod extract;
pub mod generator;
pub mod prompt;
pub mod runner;
pub mod solve;
pub mod template;

pub use config::ForgeSettings;
pub use error::ForgeError;
pub use extract::{extract_code, Extracted};
pub use generator::{ChatClient, EndpointConfig, GenerationRecord, HeuristicGenerator, ScriptStep, ScriptedGenerator};
pub use prompt::{build_prompt, default_domain_source, PromptBundle};
pub use runner::{run_planner, AttemptOutcome, Classification};
pub use solve::{
    auto_solve, AttemptRecord, AutoConfig, AutoSolveError, CargoBackend, Ledger, PlannerBackend, SimulatedBackend,
    SolveReport, StopReason,
};
pub use template::{compile_planner, BuildOptions, CompileReport, CompileResult, CompiledPlanner, Profile};

/// Source of the built-in comprehensive heuristic in generated-code form.
pub const COMPREHENSIVE_HEURISTIC_SOURCE: &str = include_str!("../assets/comprehensive_heuristic.rs");
