//! Pharmacokinetic/pharmacodynamic dynamics over discrete time.
//!
//! Concentration of medicine `m` at organ `o` is the superposition of every
//! active dose scaled by the explicit trajectory. Each effect property is
//! recomputed from its baseline plus the direct-action effect of every
//! medicine each step, which realises Loewe additivity without carrying
//! effect values across steps.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::model::{
    AdministrationAction, Bounds, Dosage, MedicationProblem, PatientState, SiteKey, Timestep,
};

pub type History = BTreeMap<String, Vec<(Timestep, Dosage)>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Min,
    Max,
}

/// A safety bound broken by a state; such states are dead-ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub organ: String,
    pub property: String,
    pub value: f64,
    pub bound: BoundKind,
    pub limit: f64,
    pub timestep: Timestep,
}

impl std::fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (rel, name) = match self.bound {
            BoundKind::Min => ("<", "min"),
            BoundKind::Max => (">", "max"),
        };
        write!(
            f,
            "({}, {}) = {} {rel} {name} {} at t={}",
            self.organ, self.property, self.value, self.limit, self.timestep
        )
    }
}

/// Direct-action model `emax * c / (c + ec50)`.
pub fn direct_effect(emax: f64, ec50: f64, concentration: f64) -> Result<f64, EngineError> {
    if !(ec50 > 0.0) {
        return Err(EngineError::Domain(format!("ec50 must be positive, got {ec50}")));
    }
    if !(concentration >= 0.0) {
        return Err(EngineError::Domain(format!(
            "concentration must be non-negative, got {concentration}"
        )));
    }
    Ok(effect_unchecked(emax, ec50, concentration))
}

#[inline]
fn effect_unchecked(emax: f64, ec50: f64, c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        emax * c / (c + ec50)
    }
}

#[inline]
fn superpose(doses: &[(Timestep, Dosage)], profile: &[f64], decay: Timestep, t: Timestep) -> f64 {
    let mut total = 0.0;
    for &(t0, d) in doses {
        let elapsed = t - t0;
        if elapsed >= 0 && elapsed < decay {
            if let Some(g) = profile.get(elapsed as usize) {
                total += g * f64::from(d);
            }
        }
    }
    total
}

/// Concentration of `medicine` at `organ` at time `t` under `history`.
pub fn concentration(
    problem: &MedicationProblem,
    history: &History,
    medicine: &str,
    organ: &str,
    t: Timestep,
) -> Result<f64, EngineError> {
    if !problem.is_medicine(medicine) {
        return Err(EngineError::UnknownMedicine(medicine.to_string()));
    }
    if !problem.is_organ(organ) {
        return Err(EngineError::UnknownOrgan(organ.to_string()));
    }
    let Some(profile) = problem.profile(medicine, organ) else {
        return Ok(0.0);
    };
    let doses = history.get(medicine).map(Vec::as_slice).unwrap_or(&[]);
    Ok(superpose(doses, profile, problem.decay(medicine), t))
}

pub fn initial_state(problem: &MedicationProblem) -> PatientState {
    Dynamics::new(problem).initial_state()
}

pub fn recompute_state(problem: &MedicationProblem, state: &PatientState) -> PatientState {
    let mut next = state.clone();
    Dynamics::new(problem).recompute(&mut next);
    next
}

pub fn check_constraints(
    problem: &MedicationProblem,
    state: &PatientState,
) -> Result<(), ConstraintViolation> {
    Dynamics::new(problem).check_constraints(state)
}

pub fn successors(
    problem: &MedicationProblem,
    state: &PatientState,
) -> Vec<(AdministrationAction, PatientState)> {
    Dynamics::new(problem).successors(state)
}

pub fn is_goal(problem: &MedicationProblem, state: &PatientState) -> bool {
    Dynamics::new(problem).is_goal(state)
}

struct MedInfo<'p> {
    name: &'p str,
    decay: Timestep,
    dosages: &'p [Dosage],
    cap: u32,
}

struct Term<'p> {
    med: usize,
    profile: &'p [f64],
    emax: f64,
    ec50: f64,
}

enum Source<'p> {
    Concentration { med: usize, profile: Option<&'p [f64]> },
    Effect { baseline: f64, terms: Vec<Term<'p>> },
}

struct Slot<'p> {
    key: SiteKey,
    source: Source<'p>,
}

/// Precompiled view of a problem used on the hot path of search.
///
/// Building one is linear in the problem size; the free functions in this
/// module build one per call, the search builds one per run.
pub struct Dynamics<'p> {
    problem: &'p MedicationProblem,
    horizon: Timestep,
    meds: Vec<MedInfo<'p>>,
    /// Sorted by key, matching `PatientState::organ_properties` iteration order.
    slots: Vec<Slot<'p>>,
    constraints: Vec<(usize, Bounds)>,
}

impl<'p> Dynamics<'p> {
    pub fn new(problem: &'p MedicationProblem) -> Self {
        let meds: Vec<MedInfo<'p>> = problem
            .medicines
            .iter()
            .map(|m| MedInfo {
                name: m.as_str(),
                decay: problem.decay(m),
                dosages: problem.dosage_sizes.get(m).map(Vec::as_slice).unwrap_or(&[]),
                cap: problem.usage_constraints.get(m).copied().unwrap_or(0),
            })
            .collect();
        let med_index: HashMap<&str, usize> =
            meds.iter().enumerate().map(|(i, m)| (m.name, i)).collect();

        let mut keys: Vec<SiteKey> = Vec::new();
        for o in &problem.organs {
            for p in &problem.properties {
                keys.push((o.clone(), p.clone()));
            }
            for m in &problem.medicines {
                if problem.profile(m, o).is_some() {
                    keys.push((o.clone(), m.clone()));
                }
            }
        }
        keys.extend(problem.goals.keys().cloned());
        keys.extend(problem.property_constraints.keys().cloned());
        keys.sort();
        keys.dedup();

        let slots: Vec<Slot<'p>> = keys
            .into_iter()
            .map(|key| {
                let source = if let Some(&med) = med_index.get(key.1.as_str()) {
                    Source::Concentration {
                        med,
                        profile: problem.profile(&key.1, &key.0),
                    }
                } else {
                    let terms = meds
                        .iter()
                        .enumerate()
                        .filter_map(|(i, m)| {
                            let ek = (m.name.to_string(), key.0.clone(), key.1.clone());
                            let emax = *problem.emax.get(&ek)?;
                            let ec50 = *problem.ec50.get(&ek)?;
                            let profile = problem.profile(m.name, &key.0)?;
                            Some(Term {
                                med: i,
                                profile,
                                emax,
                                ec50,
                            })
                        })
                        .collect();
                    Source::Effect {
                        baseline: problem.initial_value(&key.0, &key.1),
                        terms,
                    }
                };
                Slot { key, source }
            })
            .collect();

        let constraints = problem
            .property_constraints
            .iter()
            .map(|(k, b)| {
                let idx = slots
                    .binary_search_by(|s| s.key.cmp(k))
                    .expect("every constrained pair has a slot");
                (idx, *b)
            })
            .collect();

        Dynamics {
            problem,
            horizon: problem.horizon(),
            meds,
            slots,
            constraints,
        }
    }

    pub fn problem(&self) -> &'p MedicationProblem {
        self.problem
    }

    pub fn horizon(&self) -> Timestep {
        self.horizon
    }

    pub fn initial_state(&self) -> PatientState {
        let mut state = PatientState {
            timestamp: 0,
            medicine_history: self.meds.iter().map(|m| (m.name.to_string(), Vec::new())).collect(),
            medicine_doses_applied: self.meds.iter().map(|m| (m.name.to_string(), 0)).collect(),
            organ_properties: BTreeMap::new(),
            goals_remaining: self.problem.goals.clone(),
        };
        self.recompute(&mut state);
        state
    }

    fn histories<'s>(&self, state: &'s PatientState) -> Vec<&'s [(Timestep, Dosage)]> {
        self.meds
            .iter()
            .map(|m| {
                state
                    .medicine_history
                    .get(m.name)
                    .map(Vec::as_slice)
                    .unwrap_or(&[])
            })
            .collect()
    }

    fn slot_values(&self, state: &PatientState) -> Vec<f64> {
        let hist = self.histories(state);
        let t = state.timestamp;
        self.slots
            .iter()
            .map(|slot| match &slot.source {
                Source::Concentration { med, profile } => profile
                    .map(|p| superpose(hist[*med], p, self.meds[*med].decay, t))
                    .unwrap_or(0.0),
                Source::Effect { baseline, terms } => {
                    let mut v = *baseline;
                    for term in terms {
                        let c = superpose(hist[term.med], term.profile, self.meds[term.med].decay, t);
                        v += effect_unchecked(term.emax, term.ec50, c);
                    }
                    v
                }
            })
            .collect()
    }

    /// Re-derives organ properties and dose counts from the history at the
    /// state's timestamp, then latches every goal whose level is reached.
    pub fn recompute(&self, state: &mut PatientState) {
        let values = self.slot_values(state);
        let aligned = state.organ_properties.len() == self.slots.len()
            && state
                .organ_properties
                .keys()
                .zip(&self.slots)
                .all(|(k, s)| *k == s.key);
        if aligned {
            for (v, new) in state.organ_properties.values_mut().zip(values) {
                *v = new;
            }
        } else {
            state.organ_properties = self
                .slots
                .iter()
                .map(|s| s.key.clone())
                .zip(values)
                .collect();
        }
        for m in &self.meds {
            let n = state.medicine_history.get(m.name).map_or(0, Vec::len) as u32;
            match state.medicine_doses_applied.get_mut(m.name) {
                Some(count) => *count = n,
                None => {
                    state.medicine_doses_applied.insert(m.name.to_string(), n);
                }
            }
        }
        let props = &state.organ_properties;
        state
            .goals_remaining
            .retain(|k, req| props.get(k).map_or(true, |v| *v < *req));
    }

    /// First violated bound in sorted-key order. Bounds are inclusive.
    pub fn check_constraints(&self, state: &PatientState) -> Result<(), ConstraintViolation> {
        for (idx, bounds) in &self.constraints {
            let key = &self.slots[*idx].key;
            let Some(&value) = state.organ_properties.get(key) else {
                continue;
            };
            let broken = if value < bounds.min {
                Some((BoundKind::Min, bounds.min))
            } else if value > bounds.max {
                Some((BoundKind::Max, bounds.max))
            } else {
                None
            };
            if let Some((bound, limit)) = broken {
                return Err(ConstraintViolation {
                    organ: key.0.clone(),
                    property: key.1.clone(),
                    value,
                    bound,
                    limit,
                    timestep: state.timestamp,
                });
            }
        }
        Ok(())
    }

    pub fn is_dead_end(&self, state: &PatientState) -> bool {
        state.timestamp > self.horizon || self.check_constraints(state).is_err()
    }

    pub fn is_goal(&self, state: &PatientState) -> bool {
        state.goals_remaining.is_empty() && self.all_cleared(state)
    }

    pub fn all_cleared(&self, state: &PatientState) -> bool {
        self.meds.iter().all(|m| {
            state
                .medicine_history
                .get(m.name)
                .map_or(true, |h| h.iter().all(|(t0, _)| state.timestamp - t0 >= m.decay))
        })
    }

    /// Wait first, then administrations in medicine order with ascending
    /// dosages. Unsafe results are pruned.
    pub fn successors(&self, state: &PatientState) -> Vec<(AdministrationAction, PatientState)> {
        let mut out = Vec::new();
        let t = state.timestamp;
        if t + 1 <= self.horizon {
            let mut next = state.clone();
            next.timestamp = t + 1;
            self.recompute(&mut next);
            if self.check_constraints(&next).is_ok() {
                out.push((AdministrationAction::wait(t), next));
            }
        }
        for m in &self.meds {
            if state.doses_applied(m.name) >= m.cap || !state.free_this_step(m.name) {
                continue;
            }
            for &d in m.dosages {
                let mut next = state.clone();
                next.medicine_history
                    .entry(m.name.to_string())
                    .or_default()
                    .push((t, d));
                self.recompute(&mut next);
                if self.check_constraints(&next).is_ok() {
                    out.push((AdministrationAction::administer(m.name, d, t), next));
                }
            }
        }
        out
    }
}
