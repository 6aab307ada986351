#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use gmp_core::pkpd::Dynamics;
use gmp_core::{Bounds, MedicationProblem, PatientState, Timestep};
use proptest::prelude::*;
use proptest::collection::vec;

#[derive(Debug, Clone)]
pub struct MedSpec {
    pub decay: i64,
    pub peak: usize,
    pub heights: Vec<f64>,
    pub emax: f64,
    pub ec50: f64,
    pub dosages: Vec<u32>,
    pub cap: u32,
}

fn med_spec(n_organs: usize) -> impl Strategy<Value = MedSpec> {
    (2i64..=5, 0usize..5, vec(0.2f64..1.0, n_organs), 1.0f64..10.0, 0.5f64..8.0, 1u8..8, 1u32..=2).prop_map(
        |(decay, peak, heights, emax, ec50, mask, cap)| {
            let dosages = [1u32, 2, 4]
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, d)| *d)
                .collect();
            MedSpec {
                decay,
                peak: 1 + peak % (decay as usize - 1),
                heights,
                emax,
                ec50,
                dosages,
                cap,
            }
        },
    )
}

/// Trajectory that rises linearly to `height` at `peak`, then falls to 0 at `decay`.
pub fn unimodal(decay: i64, peak: usize, height: f64) -> Vec<f64> {
    let d = decay as usize;
    (0..d)
        .map(|i| {
            if i <= peak {
                height * i as f64 / peak as f64
            } else {
                height * (d - i) as f64 / (d - peak) as f64
            }
        })
        .collect()
}

pub fn build_micro(specs: &[MedSpec], goal_frac: f64, max_frac: Option<f64>, horizon: i64) -> MedicationProblem {
    let n_organs = specs[0].heights.len();
    let organs: Vec<String> = (0..n_organs).map(|i| format!("o{i}")).collect();
    let medicines: Vec<String> = (0..specs.len()).map(|i| format!("M{i}")).collect();
    let prop = "relief".to_string();
    let mut p = MedicationProblem {
        medicines: medicines.clone(),
        organs: organs.clone(),
        properties: vec![prop.clone()],
        decay_times: BTreeMap::new(),
        pk_profiles: BTreeMap::new(),
        emax: BTreeMap::new(),
        ec50: BTreeMap::new(),
        dosage_sizes: BTreeMap::new(),
        usage_constraints: BTreeMap::new(),
        property_constraints: BTreeMap::new(),
        initial_properties: BTreeMap::new(),
        goals: BTreeMap::new(),
        max_horizon: Some(horizon),
    };
    let mut reachable = 0.0;
    for (m, s) in medicines.iter().zip(specs) {
        p.decay_times.insert(m.clone(), s.decay);
        let by_organ = organs
            .iter()
            .zip(&s.heights)
            .map(|(o, h)| (o.clone(), unimodal(s.decay, s.peak, *h)))
            .collect();
        p.pk_profiles.insert(m.clone(), by_organ);
        p.emax.insert((m.clone(), organs[0].clone(), prop.clone()), s.emax);
        p.ec50.insert((m.clone(), organs[0].clone(), prop.clone()), s.ec50);
        p.dosage_sizes.insert(m.clone(), s.dosages.clone());
        p.usage_constraints.insert(m.clone(), s.cap);
        let c = s.heights[0] * f64::from(*s.dosages.last().unwrap());
        reachable += s.emax * c / (c + s.ec50);
    }
    let site = (organs[0].clone(), prop);
    let goal = (reachable * goal_frac * 100.0).round() / 100.0;
    p.goals.insert(site.clone(), goal);
    if let Some(f) = max_frac {
        p.property_constraints.insert(site, Bounds::new(0.0, goal * f));
    }
    p
}

prop_compose! {
    pub fn micro_problem()(n_organs in 1usize..=2)(
        specs in vec(med_spec(n_organs), 1..=2),
        goal_frac in 0.2f64..1.3,
        max_frac in proptest::option::of(1.0f64..1.6),
        horizon in 4i64..=10,
    ) -> MedicationProblem {
        build_micro(&specs, goal_frac, max_frac, horizon)
    }
}

type Key = (Timestep, BTreeMap<String, Vec<(Timestep, u32)>>, BTreeSet<(String, String)>);

fn key(s: &PatientState) -> Key {
    (
        s.timestamp,
        s.medicine_history.clone(),
        s.goals_remaining.keys().cloned().collect(),
    )
}

/// Exhaustive breadth-first search; returns the minimum number of actions
/// to a goal state and the number of distinct states visited.
pub fn bfs_optimum(problem: &MedicationProblem) -> (Option<usize>, usize) {
    let dynamics = Dynamics::new(problem);
    let root = dynamics.initial_state();
    if dynamics.is_dead_end(&root) {
        return (None, 1);
    }
    let mut seen = HashSet::new();
    seen.insert(key(&root));
    let mut queue = VecDeque::from([(root, 0usize)]);
    while let Some((state, depth)) = queue.pop_front() {
        if dynamics.is_goal(&state) {
            return (Some(depth), seen.len());
        }
        for (_, child) in dynamics.successors(&state) {
            if seen.insert(key(&child)) {
                queue.push_back((child, depth + 1));
            }
        }
    }
    (None, seen.len())
}
