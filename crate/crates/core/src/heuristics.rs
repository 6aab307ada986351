//! Heuristic contract and built-in evaluators.
//!
//! The comprehensive heuristic estimates the timesteps still needed to reach
//! every remaining goal and clear the body:
//!
//! * no goals left: time until every active dose is eliminated;
//! * otherwise: the slowest goal's dosing regimen, plus the elimination time
//!   of the strongest medicine per goal, plus a penalty for sitting within
//!   20% of a safety bound.

use std::str::FromStr;

use crate::model::{MedicationProblem, PatientState};

/// Penalty returned for a goal no medicine can move.
pub const NO_MEDICINE_PENALTY: f64 = 1000.0;

const SAFETY_MARGIN: f64 = 0.2;
const SAFETY_SLOPE: f64 = 5.0;

/// Finite, non-negative heuristic estimate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HeuristicValue(f64);

impl HeuristicValue {
    pub fn new(value: f64) -> Option<Self> {
        (value.is_finite() && value >= 0.0).then_some(HeuristicValue(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A state evaluator. Lower is closer to a goal.
pub trait Heuristic: Send + Sync {
    fn evaluate(&self, problem: &MedicationProblem, state: &PatientState) -> f64;

    fn name(&self) -> &str {
        "custom"
    }
}

impl<F> Heuristic for F
where
    F: Fn(&MedicationProblem, &PatientState) -> f64 + Send + Sync,
{
    fn evaluate(&self, problem: &MedicationProblem, state: &PatientState) -> f64 {
        self(problem, state)
    }
}

/// `h ≡ 0`; turns greedy best-first search into breadth-first search.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroHeuristic;

impl Heuristic for ZeroHeuristic {
    fn evaluate(&self, _: &MedicationProblem, _: &PatientState) -> f64 {
        0.0
    }

    fn name(&self) -> &str {
        "zero"
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ComprehensiveHeuristic;

impl Heuristic for ComprehensiveHeuristic {
    fn evaluate(&self, problem: &MedicationProblem, state: &PatientState) -> f64 {
        comprehensive_heuristic(problem, state).value()
    }

    fn name(&self) -> &str {
        "comprehensive"
    }
}

/// Built-in heuristic selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    Zero,
    Comprehensive,
}

impl HeuristicKind {
    pub fn evaluator(self) -> Box<dyn Heuristic> {
        match self {
            HeuristicKind::Zero => Box::new(ZeroHeuristic),
            HeuristicKind::Comprehensive => Box::new(ComprehensiveHeuristic),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            HeuristicKind::Zero => "zero",
            HeuristicKind::Comprehensive => "comprehensive",
        }
    }
}

impl FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" | "blind" => Ok(HeuristicKind::Zero),
            "comprehensive" => Ok(HeuristicKind::Comprehensive),
            other => Err(format!("unknown heuristic `{other}` (expected zero or comprehensive)")),
        }
    }
}

/// Longest remaining elimination time over every recorded dose.
pub fn clearance_time(problem: &MedicationProblem, state: &PatientState) -> f64 {
    let mut longest = 0;
    for medicine in &problem.medicines {
        let decay = problem.decay(medicine);
        if let Some(doses) = state.medicine_history.get(medicine) {
            for &(t0, _) in doses {
                longest = longest.max(decay - (state.timestamp - t0));
            }
        }
    }
    longest as f64
}

/// Linear penalty for values within 20% of either end of a constraint range.
pub fn safety_penalty(problem: &MedicationProblem, state: &PatientState) -> f64 {
    let mut penalty = 0.0;
    for (key, bounds) in &problem.property_constraints {
        let range = bounds.max - bounds.min;
        if range <= 0.0 {
            continue;
        }
        let Some(&value) = state.organ_properties.get(key) else {
            continue;
        };
        let from_min = (value - bounds.min) / range;
        let from_max = (bounds.max - value) / range;
        if from_min < SAFETY_MARGIN {
            penalty += (SAFETY_MARGIN - from_min) * SAFETY_SLOPE;
        }
        if from_max < SAFETY_MARGIN {
            penalty += (SAFETY_MARGIN - from_max) * SAFETY_SLOPE;
        }
    }
    penalty
}

/// Medicine with the largest positive `emax` on `(organ, property)`; ties go
/// to the earlier medicine.
pub fn best_medicine<'p>(
    problem: &'p MedicationProblem,
    organ: &str,
    property: &str,
) -> Option<(&'p str, f64)> {
    let mut best: Option<(&str, f64)> = None;
    let mut best_emax = 0.0;
    for m in &problem.medicines {
        let key = (m.clone(), organ.to_string(), property.to_string());
        if let Some(&e) = problem.emax.get(&key) {
            if e > best_emax {
                best_emax = e;
                best = Some((m.as_str(), e));
            }
        }
    }
    best
}

/// Index of the trajectory peak, or `max(1, decay/3)` without a trajectory.
pub fn time_to_peak(problem: &MedicationProblem, medicine: &str, organ: &str) -> f64 {
    if let Some(profile) = problem.profile(medicine, organ) {
        let mut peak_idx = 0;
        let mut peak = 0.0;
        for (i, &v) in profile.iter().enumerate() {
            if v > peak {
                peak = v;
                peak_idx = i;
            }
        }
        return peak_idx as f64;
    }
    (problem.decay(medicine) as f64 / 3.0).max(1.0)
}

/// Effect of `medicine` alone on `(organ, property)` at the state's time.
pub fn current_contribution(
    problem: &MedicationProblem,
    state: &PatientState,
    medicine: &str,
    organ: &str,
    property: &str,
) -> f64 {
    let decay = problem.decay(medicine);
    let mut level = 0.0;
    if let (Some(profile), Some(doses)) = (
        problem.profile(medicine, organ),
        state.medicine_history.get(medicine),
    ) {
        for &(t0, d) in doses {
            let elapsed = state.timestamp - t0;
            if elapsed >= 0 && elapsed < decay && (elapsed as usize) < profile.len() {
                level += f64::from(d) * profile[elapsed as usize];
            }
        }
    }
    if level <= 0.0 {
        return 0.0;
    }
    let key = (medicine.to_string(), organ.to_string(), property.to_string());
    let emax = problem.emax.get(&key).copied().unwrap_or(0.0);
    let ec50 = problem.ec50.get(&key).copied().unwrap_or(1.0);
    emax * level / (level + ec50)
}

fn peak_effect(problem: &MedicationProblem, medicine: &str, key_emax: f64, organ: &str, property: &str) -> f64 {
    let dose = problem
        .dosage_sizes
        .get(medicine)
        .and_then(|s| s.iter().max())
        .copied()
        .unwrap_or(1) as f64;
    let key = (medicine.to_string(), organ.to_string(), property.to_string());
    let ec50 = problem.ec50.get(&key).copied().unwrap_or(1.0);
    key_emax * dose / (dose + ec50)
}

fn spacing(problem: &MedicationProblem, medicine: &str) -> f64 {
    (problem.decay(medicine) as f64 / 2.0).max(1.0)
}

fn exhausted(problem: &MedicationProblem, state: &PatientState, medicine: &str) -> bool {
    let cap = problem.usage_constraints.get(medicine).copied().unwrap_or(u32::MAX);
    state.doses_applied(medicine) >= cap
}

/// Estimated time to close `deficit` on one goal pair.
pub fn time_to_reach_goal(
    problem: &MedicationProblem,
    state: &PatientState,
    organ: &str,
    property: &str,
    deficit: f64,
) -> f64 {
    if deficit <= 0.0 {
        return 0.0;
    }
    let Some((medicine, emax)) = best_medicine(problem, organ, property) else {
        return NO_MEDICINE_PENALTY;
    };
    if exhausted(problem, state, medicine) {
        return alternative_medicine_time(problem, state, organ, property, deficit, medicine);
    }
    let peak = peak_effect(problem, medicine, emax, organ, property);
    if peak <= 0.0 {
        return NO_MEDICINE_PENALTY;
    }
    let t_peak = time_to_peak(problem, medicine, organ);
    let contribution = current_contribution(problem, state, medicine, organ, property);
    let adjusted = (deficit - contribution).max(0.0);
    let doses = (adjusted / peak).ceil().max(1.0);
    t_peak + (doses - 1.0) * spacing(problem, medicine)
}

/// Fastest regimen among the other non-exhausted medicines with positive
/// `emax`, scanned in problem order.
fn alternative_medicine_time(
    problem: &MedicationProblem,
    state: &PatientState,
    organ: &str,
    property: &str,
    deficit: f64,
    excluded: &str,
) -> f64 {
    let mut best = NO_MEDICINE_PENALTY;
    for m in &problem.medicines {
        if m == excluded || exhausted(problem, state, m) {
            continue;
        }
        let key = (m.clone(), organ.to_string(), property.to_string());
        let emax = problem.emax.get(&key).copied().unwrap_or(0.0);
        if emax <= 0.0 {
            continue;
        }
        let peak = peak_effect(problem, m, emax, organ, property);
        if peak > 0.0 {
            let doses = (deficit / peak).ceil();
            let estimate = time_to_peak(problem, m, organ) + (doses - 1.0) * spacing(problem, m);
            best = best.min(estimate);
        }
    }
    best
}

/// Slowest remaining goal under its best single-medicine regimen.
pub fn max_goal_time(problem: &MedicationProblem, state: &PatientState) -> f64 {
    let mut slowest = 0.0_f64;
    for ((organ, property), required) in &state.goals_remaining {
        let current = state
            .organ_properties
            .get(&(organ.clone(), property.clone()))
            .copied()
            .unwrap_or(0.0);
        let t = time_to_reach_goal(problem, state, organ, property, required - current);
        slowest = slowest.max(t);
    }
    slowest
}

/// Elimination time of the strongest medicine for each remaining goal,
/// maximised over goals. Usage caps are not consulted.
pub fn clearance_penalty(problem: &MedicationProblem, state: &PatientState) -> f64 {
    let mut longest = 0.0_f64;
    for (organ, property) in state.goals_remaining.keys() {
        if let Some((m, _)) = best_medicine(problem, organ, property) {
            longest = longest.max(problem.decay(m) as f64);
        }
    }
    longest
}

pub fn comprehensive_heuristic(problem: &MedicationProblem, state: &PatientState) -> HeuristicValue {
    let raw = if state.goals_remaining.is_empty() {
        clearance_time(problem, state)
    } else {
        max_goal_time(problem, state) + clearance_penalty(problem, state) + safety_penalty(problem, state)
    };
    // Every component is a max or sum of non-negative finite terms.
    HeuristicValue::new(raw).unwrap_or(HeuristicValue(NO_MEDICINE_PENALTY))
}
