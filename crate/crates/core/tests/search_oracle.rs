mod common;

use gmp_core::heuristics::{
    clearance_penalty, clearance_time, comprehensive_heuristic as comprehensive, max_goal_time, safety_penalty,
};
use gmp_core::pkpd::Dynamics;
use gmp_core::{
    gbfs, validate_plan, ComprehensiveHeuristic, SearchLimits, SearchStatus, ZeroHeuristic,
};
use proptest::collection::vec;
use proptest::prelude::*;

use common::{bfs_optimum, micro_problem};

fn ample() -> SearchLimits {
    SearchLimits::new(30.0, u64::MAX).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_heuristic_gbfs_matches_bfs(p in micro_problem()) {
        let (optimum, _) = bfs_optimum(&p);
        let r = gbfs(&p, &ZeroHeuristic, ample());
        match optimum {
            Some(cost) => {
                prop_assert_eq!(r.status, SearchStatus::Solved);
                let plan = r.plan.unwrap();
                prop_assert_eq!(plan.cost(), cost);
                let verdict = validate_plan(&p, &plan).unwrap();
                prop_assert!(verdict.valid, "{:?}", verdict);
            }
            None => prop_assert_eq!(r.status, SearchStatus::Exhausted),
        }
    }

    #[test]
    fn comprehensive_plans_validate(p in micro_problem()) {
        let (optimum, _) = bfs_optimum(&p);
        let r = gbfs(&p, &ComprehensiveHeuristic, ample());
        prop_assert_eq!(r.status == SearchStatus::Solved, optimum.is_some());
        if let Some(plan) = r.plan {
            prop_assert!(validate_plan(&p, &plan).unwrap().valid);
        }
    }

    #[test]
    fn search_is_deterministic(p in micro_problem()) {
        let a = gbfs(&p, &ComprehensiveHeuristic, ample());
        let b = gbfs(&p, &ComprehensiveHeuristic, ample());
        prop_assert_eq!(a.plan, b.plan);
        prop_assert_eq!((a.expanded, a.generated, a.duplicates), (b.expanded, b.generated, b.duplicates));
    }

    #[test]
    fn comprehensive_invariants_on_reachable_states(p in micro_problem(), picks in vec(0usize..8, 0..12)) {
        let dynamics = Dynamics::new(&p);
        let mut state = dynamics.initial_state();
        for pick in picks {
            let h = comprehensive(&p, &state).value();
            prop_assert!(h.is_finite() && h >= 0.0);
            if dynamics.is_goal(&state) {
                prop_assert_eq!(h, 0.0);
            }
            if state.goals_remaining.is_empty() {
                prop_assert_eq!(h, clearance_time(&p, &state));
            } else {
                let parts = max_goal_time(&p, &state) + clearance_penalty(&p, &state) + safety_penalty(&p, &state);
                prop_assert!((h - parts).abs() <= 1e-12);
            }
            let children = dynamics.successors(&state);
            if children.is_empty() {
                break;
            }
            state = children[pick % children.len()].1.clone();
        }
    }
}

/// Goal level above the sum of every reachable Emax cannot be met.
#[test]
fn unreachable_goal_exhausts() {
    let mut p = common::build_micro(
        &[common::MedSpec {
            decay: 3,
            peak: 1,
            heights: vec![1.0],
            emax: 5.0,
            ec50: 1.0,
            dosages: vec![1, 2],
            cap: 2,
        }],
        0.5,
        None,
        10,
    );
    p.goals.insert(("o0".into(), "relief".into()), 5.0 + 1e-6);
    assert_eq!(gbfs(&p, &ZeroHeuristic, ample()).status, SearchStatus::Exhausted);
    assert_eq!(bfs_optimum(&p).0, None);
}
