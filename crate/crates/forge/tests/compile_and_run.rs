mod common;

use std::time::{Duration, Instant};

use gmp_core::pkpd::Dynamics;
use gmp_core::heuristics::comprehensive_heuristic;
use gmp_forge::{
    compile_planner, run_planner, Classification, CompileResult, CompiledPlanner, COMPREHENSIVE_HEURISTIC_SOURCE,
};

use common::*;

mod asset {
    use gmp_core::prelude::*;
    include!("../assets/comprehensive_heuristic.rs");

    pub fn evaluate(problem: &MedicationProblem, state: &State) -> f64 {
        heuristic(problem, state)
    }
}

fn build(code: &str, tag: &str) -> CompiledPlanner {
    let report = compile_planner(code, &workspace(tag), &build_options()).unwrap();
    match report.result {
        CompileResult::Built(p) => p,
        CompileResult::Failed { diagnostics } => panic!("build failed:\n{diagnostics}"),
    }
}

fn diagnostics(code: &str, tag: &str) -> String {
    match compile_planner(code, &workspace(tag), &build_options()).unwrap().result {
        CompileResult::Failed { diagnostics } => diagnostics,
        CompileResult::Built(p) => panic!("expected a build failure, got {}", p.executable.display()),
    }
}

#[test]
fn asset_heuristic_matches_the_library() {
    let problem = load("micro.gmp.json");
    let dynamics = Dynamics::new(&problem);
    let mut frontier = vec![dynamics.initial_state()];
    let mut checked = 0;
    while let Some(state) = frontier.pop() {
        assert_eq!(
            asset::evaluate(&problem, &state),
            comprehensive_heuristic(&problem, &state).value(),
            "{state:?}"
        );
        checked += 1;
        frontier.extend(dynamics.successors(&state).into_iter().map(|(_, s)| s));
    }
    assert!(checked > 20, "only {checked} states reached");
}

#[test]
fn builtin_heuristic_solves_micro() {
    let planner = build(COMPREHENSIVE_HEURISTIC_SOURCE, "builtin");
    let problem = load("micro.gmp.json");
    let o = run_planner(&planner, &problem, &fixture("micro.gmp.json"), Duration::from_secs(30), 1 << 30).unwrap();
    assert_eq!(o.classification, Classification::Success, "{o:?}");
    assert!(o.verdict.as_ref().is_some_and(|v| v.valid));
    assert!(o.plan(&problem).is_some());
}

#[test]
fn syntax_errors_are_compile_failures() {
    let d = diagnostics(SYNTAX_ERROR, "syntax");
    assert!(d.contains("error"), "{d}");
}

#[test]
fn wrong_signature_is_a_compile_failure() {
    let d = diagnostics(WRONG_SIGNATURE, "signature");
    assert!(d.contains("mismatched types") || d.contains("E0308"), "{d}");
}

#[test]
fn memory_hog_is_oom() {
    let planner = build(HOG, "hog");
    let problem = load("micro.gmp.json");
    let o = run_planner(&planner, &problem, &fixture("micro.gmp.json"), Duration::from_secs(30), 128 << 20).unwrap();
    assert_eq!(o.classification, Classification::Oom, "{o:?}");
}

#[test]
fn busy_loop_is_killed_after_the_slice() {
    let planner = build(BUSY, "busy");
    let problem = load("micro.gmp.json");
    let started = Instant::now();
    let o = run_planner(&planner, &problem, &fixture("micro.gmp.json"), Duration::from_secs(2), 1 << 30).unwrap();
    let took = started.elapsed().as_secs_f64();
    assert_eq!(o.classification, Classification::Timeout, "{o:?}");
    assert!((2.0..4.0).contains(&took), "killed after {took} s");
}

#[test]
fn panics_and_dead_ends_are_runtime_errors() {
    let planner = build(PANICS, "panics");
    let problem = load("micro.gmp.json");
    let o = run_planner(&planner, &problem, &fixture("micro.gmp.json"), Duration::from_secs(30), 1 << 30).unwrap();
    assert_eq!(o.classification, Classification::RuntimeError, "{o:?}");
    assert!(o.detail.contains("gave up"), "{}", o.detail);

    let planner = build(COMPREHENSIVE_HEURISTIC_SOURCE, "builtin");
    let hard = load("unsolvable.gmp.json");
    let o = run_planner(&planner, &hard, &fixture("unsolvable.gmp.json"), Duration::from_secs(30), 1 << 30).unwrap();
    assert_eq!(o.classification, Classification::RuntimeError, "{o:?}");
}
