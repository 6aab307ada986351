//! Instance transforms used to build harder suite variants.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use gmp_core::{MedicationProblem, ProblemError, Timestep};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TIGHT_EPSILON: f64 = 0.01;
pub const DEFAULT_PERTURBATION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// Upper bound of every constrained goal pair becomes `required·(1+ε)`.
    Tight { epsilon: f64 },
    /// Time grid refined `k`-fold by linear interpolation.
    Stretch { k: u32 },
    /// Time grid coarsened `k`-fold by sampling every `k`-th step.
    Shrink { k: u32 },
    /// Each medicine gets `k−1` perturbed copies named `{m}_v{i}`.
    MedsTimes { k: u32, perturbation: f64, seed: u64 },
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Tight { .. } => write!(f, "tight"),
            Transform::Stretch { k } => write!(f, "stretch{k}"),
            Transform::Shrink { k } => write!(f, "shrink{k}"),
            Transform::MedsTimes { k, .. } => write!(f, "meds{k}"),
        }
    }
}

/// Parses `tight`, `stretch4`, `shrink2`, `meds4` with default parameters.
impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = |rest: &str| rest.parse::<u32>().map_err(|_| format!("bad factor in `{s}`"));
        if s == "tight" {
            Ok(Transform::Tight {
                epsilon: DEFAULT_TIGHT_EPSILON,
            })
        } else if let Some(r) = s.strip_prefix("stretch") {
            Ok(Transform::Stretch { k: k(r)? })
        } else if let Some(r) = s.strip_prefix("shrink") {
            Ok(Transform::Shrink { k: k(r)? })
        } else if let Some(r) = s.strip_prefix("meds") {
            Ok(Transform::MedsTimes {
                k: k(r)?,
                perturbation: DEFAULT_PERTURBATION,
                seed: 0,
            })
        } else {
            Err(format!("unknown transform `{s}` (tight, stretchK, shrinkK, medsK)"))
        }
    }
}

fn stretch_profile(g: &[f64], k: usize) -> Vec<f64> {
    let at = |i: usize| g.get(i).copied().unwrap_or(0.0);
    (0..g.len() * k)
        .map(|j| {
            let (i, r) = (j / k, j % k);
            if r == 0 {
                at(i)
            } else {
                let frac = r as f64 / k as f64;
                at(i) + frac * (at(i + 1) - at(i))
            }
        })
        .collect()
}

fn shrink_profile(g: &[f64], k: usize) -> Vec<f64> {
    g.iter().step_by(k).copied().collect()
}

fn ceil_div(a: Timestep, k: Timestep) -> Timestep {
    (a + k - 1) / k
}

fn check_factor(k: u32) -> Result<(), ProblemError> {
    if k == 0 {
        return Err(ProblemError::Invariant("scaling factor must be at least 1".into()));
    }
    Ok(())
}

pub fn apply_transform(problem: &MedicationProblem, transform: &Transform) -> Result<MedicationProblem, ProblemError> {
    let mut p = problem.clone();
    match *transform {
        Transform::Tight { epsilon } => {
            for (key, required) in &problem.goals {
                if let Some(bounds) = p.property_constraints.get_mut(key) {
                    bounds.max = required + epsilon * required.abs();
                }
            }
        }
        Transform::Stretch { k } => {
            check_factor(k)?;
            let kk = Timestep::from(k);
            for d in p.decay_times.values_mut() {
                *d *= kk;
            }
            for by_organ in p.pk_profiles.values_mut() {
                for g in by_organ.values_mut() {
                    *g = stretch_profile(g, k as usize);
                }
            }
            p.max_horizon = p.max_horizon.map(|h| h * kk);
        }
        Transform::Shrink { k } => {
            check_factor(k)?;
            let kk = Timestep::from(k);
            for d in p.decay_times.values_mut() {
                *d = ceil_div(*d, kk).max(1);
            }
            for by_organ in p.pk_profiles.values_mut() {
                for g in by_organ.values_mut() {
                    *g = shrink_profile(g, k as usize);
                }
            }
            p.max_horizon = p.max_horizon.map(|h| ceil_div(h, kk).max(1));
        }
        Transform::MedsTimes { k, perturbation, seed } => {
            check_factor(k)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut jitter = |x: f64| {
                if perturbation > 0.0 {
                    x * (1.0 + rng.random_range(-perturbation..=perturbation))
                } else {
                    x
                }
            };
            let mut medicines = Vec::new();
            for m in &problem.medicines {
                medicines.push(m.clone());
                for i in 1..k {
                    let copy = format!("{m}_v{i}");
                    medicines.push(copy.clone());
                    p.decay_times.insert(copy.clone(), problem.decay_times[m]);
                    p.dosage_sizes.insert(copy.clone(), problem.dosage_sizes[m].clone());
                    p.usage_constraints.insert(copy.clone(), problem.usage_constraints[m]);
                    if let Some(by_organ) = problem.pk_profiles.get(m) {
                        let perturbed: BTreeMap<_, _> = by_organ
                            .iter()
                            .map(|(o, g)| (o.clone(), g.iter().map(|&v| if v > 0.0 { jitter(v) } else { v }).collect()))
                            .collect();
                        p.pk_profiles.insert(copy.clone(), perturbed);
                    }
                    for ((em, o, prop), &e) in problem.emax.range((m.clone(), String::new(), String::new())..) {
                        if em != m {
                            break;
                        }
                        let key = (copy.clone(), o.clone(), prop.clone());
                        p.emax.insert(key.clone(), jitter(e));
                        p.ec50.insert(key.clone(), jitter(problem.ec50[&(m.clone(), o.clone(), prop.clone())]));
                    }
                }
            }
            p.medicines = medicines;
        }
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stretch_keeps_sample_points_and_adds_midpoints() {
        let s = stretch_profile(&[0.0, 1.0, 0.5], 2);
        assert_eq!(s, vec![0.0, 0.5, 1.0, 0.75, 0.5, 0.25]);
        assert_eq!(shrink_profile(&s, 2), vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn names_parse() {
        assert_eq!("stretch4".parse::<Transform>().unwrap(), Transform::Stretch { k: 4 });
        assert!("meds".parse::<Transform>().is_err());
        assert!("double".parse::<Transform>().is_err());
        assert_eq!(Transform::MedsTimes { k: 4, perturbation: 0.05, seed: 1 }.to_string(), "meds4");
    }
}
