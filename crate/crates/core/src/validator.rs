//! Independent plan validator.
//!
//! Re-simulates a plan from scratch with its own evaluation of the PK/PD
//! formulas (no code shared with the search's successor path) and checks
//! the three-part goal: every target reached at some point, every safety
//! bound respected throughout, every dose cleared at the end.
//!
//! Administrations are grouped by timestep. Within one timestep they are
//! applied in the listed order and each intermediate state is checked, the
//! same granularity at which search generates states.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionKind, Dosage, MedicationProblem, Plan, SiteKey, Timestep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureReason {
    ConstraintViolated,
    GoalNeverReached,
    NotCleared,
    DuplicateSameStep,
    DosageNotAllowed,
    UsageCapExceeded,
    HorizonExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub reason: FailureReason,
    pub timestep: Timestep,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

impl Verdict {
    fn ok() -> Self {
        Verdict {
            valid: true,
            failure: None,
        }
    }

    fn fail(reason: FailureReason, timestep: Timestep, detail: impl Into<String>) -> Self {
        Verdict {
            valid: false,
            failure: Some(Failure {
                reason,
                timestep,
                detail: detail.into(),
            }),
        }
    }

    pub fn reason(&self) -> Option<FailureReason> {
        self.failure.as_ref().map(|f| f.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("malformed plan: {0}")]
    Malformed(String),
}

struct Replay<'p> {
    problem: &'p MedicationProblem,
    doses: BTreeMap<&'p str, Vec<(Timestep, Dosage)>>,
}

impl<'p> Replay<'p> {
    fn level(&self, medicine: &str, organ: &str, t: Timestep) -> f64 {
        let Some(traj) = self
            .problem
            .pk_profiles
            .get(medicine)
            .and_then(|by_organ| by_organ.get(organ))
        else {
            return 0.0;
        };
        let decay = self.problem.decay_times[medicine];
        self.doses.get(medicine).map_or(0.0, |doses| {
            doses
                .iter()
                .filter_map(|&(t0, d)| {
                    let dt = t - t0;
                    (0..decay)
                        .contains(&dt)
                        .then(|| traj.get(dt as usize).map(|g| g * f64::from(d)))
                        .flatten()
                })
                .sum()
        })
    }

    fn value(&self, (organ, property): &SiteKey, t: Timestep) -> f64 {
        if self.problem.medicines.contains(property) {
            return self.level(property, organ, t);
        }
        let base = self
            .problem
            .initial_properties
            .get(&(organ.clone(), property.clone()))
            .copied()
            .unwrap_or(0.0);
        let effects: f64 = self
            .problem
            .emax
            .iter()
            .filter(|((_, o, p), _)| o == organ && p == property)
            .map(|((m, o, p), emax)| {
                let c = self.level(m, o, t);
                if c > 0.0 {
                    let ec50 = self.problem.ec50[&(m.clone(), o.clone(), p.clone())];
                    emax * c / (c + ec50)
                } else {
                    0.0
                }
            })
            .sum();
        base + effects
    }

    /// Checks safety at `t` and latches reached goals.
    fn observe(&self, t: Timestep, unlatched: &mut BTreeSet<SiteKey>) -> Option<Verdict> {
        for (key, b) in &self.problem.property_constraints {
            let v = self.value(key, t);
            if v < b.min || v > b.max {
                return Some(Verdict::fail(
                    FailureReason::ConstraintViolated,
                    t,
                    format!("({}, {}) = {v} outside [{}, {}]", key.0, key.1, b.min, b.max),
                ));
            }
        }
        unlatched.retain(|key| self.value(key, t) < self.problem.goals[key]);
        None
    }
}

pub fn validate_plan(problem: &MedicationProblem, plan: &Plan) -> Result<Verdict, PlanError> {
    let mut by_step: BTreeMap<Timestep, Vec<(&str, Dosage)>> = BTreeMap::new();
    let mut last = 0;
    for action in &plan.actions {
        if action.applied_at < last {
            return Err(PlanError::Malformed(format!(
                "timestep {} follows timestep {last}",
                action.applied_at
            )));
        }
        last = action.applied_at;
        if let ActionKind::Administer { medicine, dosage } = &action.kind {
            let Some(m) = problem.medicines.iter().find(|m| *m == medicine) else {
                return Err(PlanError::Malformed(format!("unknown medicine `{medicine}`")));
            };
            by_step.entry(action.applied_at).or_default().push((m.as_str(), *dosage));
        }
    }
    if let Some((&first, _)) = by_step.iter().next() {
        if first < 0 {
            return Err(PlanError::Malformed(format!("negative timestep {first}")));
        }
    }
    if let Some((&final_admin, _)) = by_step.iter().next_back() {
        if final_admin > plan.makespan {
            return Err(PlanError::Malformed(format!(
                "administration at {final_admin} after makespan {}",
                plan.makespan
            )));
        }
    }

    let horizon = problem.horizon();
    let mut replay = Replay {
        problem,
        doses: BTreeMap::new(),
    };
    let mut unlatched: BTreeSet<SiteKey> = problem.goals.keys().cloned().collect();

    for t in 0..=plan.makespan {
        if t > horizon {
            return Ok(Verdict::fail(
                FailureReason::HorizonExceeded,
                t,
                format!("plan runs to {} past horizon {horizon}", plan.makespan),
            ));
        }
        if let Some(v) = replay.observe(t, &mut unlatched) {
            return Ok(v);
        }
        for &(m, d) in by_step.get(&t).map(Vec::as_slice).unwrap_or(&[]) {
            if !problem.dosage_sizes[m].contains(&d) {
                return Ok(Verdict::fail(
                    FailureReason::DosageNotAllowed,
                    t,
                    format!("dosage {d} is not on the menu of `{m}`"),
                ));
            }
            let given = replay.doses.entry(m).or_default();
            if given.iter().any(|(t0, _)| *t0 == t) {
                return Ok(Verdict::fail(
                    FailureReason::DuplicateSameStep,
                    t,
                    format!("`{m}` administered twice at t={t}"),
                ));
            }
            let cap = problem.usage_constraints[m];
            if given.len() as u32 >= cap {
                return Ok(Verdict::fail(
                    FailureReason::UsageCapExceeded,
                    t,
                    format!("`{m}` exceeds its cap of {cap} administrations"),
                ));
            }
            given.push((t, d));
            if let Some(v) = replay.observe(t, &mut unlatched) {
                return Ok(v);
            }
        }
    }

    if let Some((o, p)) = unlatched.iter().next() {
        return Ok(Verdict::fail(
            FailureReason::GoalNeverReached,
            plan.makespan,
            format!("({o}, {p}) never reached {}", problem.goals[&(o.clone(), p.clone())]),
        ));
    }
    for (m, doses) in &replay.doses {
        let decay = problem.decay_times[*m];
        if let Some((t0, _)) = doses.iter().find(|(t0, _)| plan.makespan - t0 < decay) {
            return Ok(Verdict::fail(
                FailureReason::NotCleared,
                plan.makespan,
                format!("dose of `{m}` from t={t0} is still active at t={}", plan.makespan),
            ));
        }
    }
    Ok(Verdict::ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_problem, AdministrationAction};

    fn problem() -> MedicationProblem {
        parse_problem(
            r#"{
            "medicines": ["A", "B"], "organs": ["liver"], "properties": ["relief"],
            "decay_times": {"A": 3, "B": 2},
            "pk_profiles": {"A": {"liver": [0.0, 1.0, 0.5]}, "B": {"liver": [0.0, 1.0]}},
            "emax": {"A": {"liver": {"relief": 8.0}}, "B": {"liver": {"relief": 4.0}}},
            "ec50": {"A": {"liver": {"relief": 4.0}}, "B": {"liver": {"relief": 4.0}}},
            "dosage_sizes": {"A": [2, 4], "B": [4]},
            "usage_constraints": {"A": 1, "B": 1},
            "property_constraints": {"liver": {"relief": {"min": 0.0, "max": 7.0}}},
            "initial_properties": {},
            "goals": {"liver": {"relief": 5.0}},
            "max_horizon": 6
        }"#,
        )
        .unwrap()
    }

    fn plan(admins: &[(&str, Dosage, Timestep)], makespan: Timestep) -> Plan {
        let owned: Vec<_> = admins.iter().map(|(m, d, t)| (m.to_string(), *d, *t)).collect();
        Plan::from_administrations(&owned, makespan)
    }

    #[test]
    fn accepts_a_valid_plan() {
        // t=1: A gives 8*4/8 = 4, B gives 4*4/8 = 2 -> 6 >= 5, <= 7
        let v = validate_plan(&problem(), &plan(&[("A", 4, 0), ("B", 4, 0)], 3)).unwrap();
        assert!(v.valid, "{v:?}");
    }

    #[test]
    fn each_mutation_yields_its_reason() {
        let p = problem();
        let cases = [
            (plan(&[("A", 4, 0)], 3), FailureReason::GoalNeverReached),
            (plan(&[("A", 4, 0), ("B", 4, 0)], 2), FailureReason::NotCleared),
            (plan(&[("A", 4, 0), ("A", 4, 0)], 3), FailureReason::DuplicateSameStep),
            (plan(&[("A", 3, 0)], 3), FailureReason::DosageNotAllowed),
            (plan(&[("A", 4, 0), ("A", 4, 1)], 4), FailureReason::UsageCapExceeded),
            (plan(&[("A", 4, 0), ("B", 4, 0)], 7), FailureReason::HorizonExceeded),
        ];
        for (candidate, expected) in cases {
            let v = validate_plan(&p, &candidate).unwrap();
            assert_eq!(v.reason(), Some(expected), "{candidate:?}");
        }

        let mut tight = p.clone();
        tight.property_constraints.insert(
            ("liver".into(), "relief".into()),
            crate::model::Bounds::new(0.0, 5.5),
        );
        let v = validate_plan(&tight, &plan(&[("A", 4, 0), ("B", 4, 0)], 3)).unwrap();
        assert_eq!(v.reason(), Some(FailureReason::ConstraintViolated));
        assert_eq!(v.failure.unwrap().timestep, 1);
    }

    #[test]
    fn malformed_plans_are_errors() {
        let p = problem();
        let mut backwards = plan(&[("A", 4, 2)], 5);
        backwards.actions.push(AdministrationAction::administer("B", 4, 0));
        assert!(validate_plan(&p, &backwards).is_err());
        assert!(validate_plan(&p, &plan(&[("Z", 4, 0)], 3)).is_err());
    }

    #[test]
    fn order_within_a_step_does_not_matter_for_monotone_effects() {
        let p = problem();
        let a = validate_plan(&p, &plan(&[("A", 4, 0), ("B", 4, 0)], 3)).unwrap();
        let b = validate_plan(&p, &plan(&[("B", 4, 0), ("A", 4, 0)], 3)).unwrap();
        assert_eq!(a, b);
    }
}
