//! Synthetic benchmark instances.
//!
//! Each instance is built around a random witness regimen. The regimen is
//! simulated, goals are placed below the levels it reaches, and safety
//! bounds are placed around the range it stays in. The witness is then
//! checked with the plan validator, so every instance is solvable.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::Path;

use gmp_core::pkpd::{concentration, direct_effect};
use gmp_core::{serialize_problem, validate_plan, Bounds, MedicationProblem, Plan, Timestep};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("invalid suite spec: {0}")]
    Invalid(String),
    #[error("no certified instance after {0} tries; widen the suite ranges")]
    Unsatisfiable(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub name: String,
    pub count: usize,
    pub medicines: RangeInclusive<usize>,
    pub organs: RangeInclusive<usize>,
    /// Properties with goals.
    pub therapeutic: RangeInclusive<usize>,
    /// Properties that are only bounded.
    pub side_effects: RangeInclusive<usize>,
    pub decay: RangeInclusive<Timestep>,
    pub usage_cap: RangeInclusive<u32>,
    /// Dosage menus are drawn from this set.
    pub dosage_pool: Vec<u32>,
    pub menu_size: RangeInclusive<usize>,
    /// Peak position as a fraction of the decay time.
    pub peak_fraction: RangeInclusive<f64>,
    /// Exponent of the falling edge; 1 is linear, larger is sharper.
    pub tail_shape: RangeInclusive<f64>,
    pub emax: RangeInclusive<f64>,
    pub ec50: RangeInclusive<f64>,
    /// Goal = baseline + fraction · (witness peak − baseline).
    pub goal_fraction: RangeInclusive<f64>,
    /// Relative headroom of upper bounds over the witness maximum.
    pub bound_margin: RangeInclusive<f64>,
    /// Steps over which witness doses are spread.
    pub witness_window: Timestep,
    /// Steps added past the witness clearance time; `None` leaves the
    /// horizon to the default formula.
    pub horizon_slack: Option<Timestep>,
    /// Chance that a medicine acts on a given (organ, property) pair.
    pub effect_density: f64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            name: "synthetic".into(),
            count: 37,
            medicines: 3..=5,
            organs: 1..=2,
            therapeutic: 1..=2,
            side_effects: 0..=1,
            decay: 4..=8,
            usage_cap: 2..=3,
            dosage_pool: vec![1, 2, 4, 8],
            menu_size: 1..=2,
            peak_fraction: 0.2..=0.5,
            tail_shape: 1.0..=2.0,
            emax: 2.0..=10.0,
            ec50: 1.0..=8.0,
            goal_fraction: 0.75..=0.95,
            bound_margin: 0.05..=0.3,
            witness_window: 8,
            horizon_slack: Some(2),
            effect_density: 0.6,
        }
    }
}

impl SuiteSpec {
    /// One or two medicines, one organ and property, short decay and horizon.
    pub fn micro() -> Self {
        SuiteSpec {
            name: "micro".into(),
            count: 24,
            medicines: 1..=2,
            organs: 1..=1,
            therapeutic: 1..=1,
            side_effects: 0..=0,
            decay: 2..=3,
            usage_cap: 1..=2,
            dosage_pool: vec![1, 2, 4],
            menu_size: 1..=2,
            witness_window: 2,
            horizon_slack: Some(1),
            effect_density: 1.0,
            ..SuiteSpec::default()
        }
    }

    fn check(&self) -> Result<(), SpecError> {
        let bad = |m: &str| Err(SpecError::Invalid(m.into()));
        if self.count == 0 {
            return bad("count must be positive");
        }
        if *self.medicines.start() == 0 || *self.organs.start() == 0 || *self.therapeutic.start() == 0 {
            return bad("medicines, organs and therapeutic properties need at least one");
        }
        if *self.decay.start() < 2 {
            return bad("decay times must be at least 2");
        }
        if *self.usage_cap.start() == 0 {
            return bad("usage caps must be positive");
        }
        if self.dosage_pool.is_empty() || self.dosage_pool.contains(&0) || *self.menu_size.start() == 0 {
            return bad("dosage pool and menus must be non-empty and positive");
        }
        if *self.menu_size.end() > self.dosage_pool.len() {
            return bad("menu size exceeds the dosage pool");
        }
        if *self.emax.start() <= 0.0 || *self.ec50.start() <= 0.0 {
            return bad("emax and ec50 ranges must be positive");
        }
        if !(*self.goal_fraction.start() > 0.0 && *self.goal_fraction.end() <= 1.0) {
            return bad("goal fraction must lie in (0, 1]");
        }
        if self.witness_window < 1 {
            return bad("witness window must be positive");
        }
        Ok(())
    }
}

fn pick<T: Copy + PartialOrd + rand::distr::uniform::SampleUniform>(rng: &mut ChaCha8Rng, r: &RangeInclusive<T>) -> T {
    if r.start() >= r.end() {
        *r.start()
    } else {
        rng.random_range(r.clone())
    }
}

fn profile(rng: &mut ChaCha8Rng, spec: &SuiteSpec, decay: Timestep) -> Vec<f64> {
    let d = decay as usize;
    let peak = ((pick(rng, &spec.peak_fraction) * d as f64).round() as usize).clamp(1, d - 1);
    let shape = pick(rng, &spec.tail_shape);
    let height = rng.random_range(0.3..=1.0);
    (0..d)
        .map(|i| {
            let v = if i <= peak {
                height * i as f64 / peak as f64
            } else {
                height * ((d - i) as f64 / (d - peak) as f64).powf(shape)
            };
            (v * 1e4).round() / 1e4
        })
        .collect()
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Static part of an instance: everything except goals, bounds and horizon.
fn skeleton(rng: &mut ChaCha8Rng, spec: &SuiteSpec) -> MedicationProblem {
    let n_meds = pick(rng, &spec.medicines);
    let n_organs = pick(rng, &spec.organs);
    let n_ther = pick(rng, &spec.therapeutic);
    let n_side = pick(rng, &spec.side_effects);
    let medicines: Vec<String> = (0..n_meds).map(|i| format!("drug{i}")).collect();
    let organs: Vec<String> = (0..n_organs).map(|i| format!("site{i}")).collect();
    let properties: Vec<String> = (0..n_ther)
        .map(|i| format!("relief{i}"))
        .chain((0..n_side).map(|i| format!("toxicity{i}")))
        .collect();

    let mut p = MedicationProblem {
        medicines: medicines.clone(),
        organs: organs.clone(),
        properties: properties.clone(),
        decay_times: BTreeMap::new(),
        pk_profiles: BTreeMap::new(),
        emax: BTreeMap::new(),
        ec50: BTreeMap::new(),
        dosage_sizes: BTreeMap::new(),
        usage_constraints: BTreeMap::new(),
        property_constraints: BTreeMap::new(),
        initial_properties: BTreeMap::new(),
        goals: BTreeMap::new(),
        max_horizon: None,
    };
    for m in &medicines {
        let decay = pick(rng, &spec.decay);
        p.decay_times.insert(m.clone(), decay);
        let by_organ = organs.iter().map(|o| (o.clone(), profile(rng, spec, decay))).collect();
        p.pk_profiles.insert(m.clone(), by_organ);
        let n = pick(rng, &spec.menu_size);
        let mut menu: Vec<u32> = spec.dosage_pool.choose_multiple(rng, n).copied().collect();
        menu.sort_unstable();
        p.dosage_sizes.insert(m.clone(), menu);
        p.usage_constraints.insert(m.clone(), pick(rng, &spec.usage_cap));
        for o in &organs {
            for prop in &properties {
                if rng.random_bool(spec.effect_density.clamp(0.0, 1.0)) {
                    let key = (m.clone(), o.clone(), prop.clone());
                    p.emax.insert(key.clone(), round2(pick(rng, &spec.emax)));
                    p.ec50.insert(key, round2(pick(rng, &spec.ec50)));
                }
            }
        }
    }
    p
}

/// Random regimen: per medicine up to its cap, at distinct steps.
fn witness(rng: &mut ChaCha8Rng, p: &MedicationProblem, window: Timestep) -> Vec<(String, u32, Timestep)> {
    let mut admins = Vec::new();
    for m in &p.medicines {
        let cap = p.usage_constraints[m] as usize;
        let mut slots: Vec<Timestep> = (0..window).collect();
        slots.shuffle(rng);
        let n = rng.random_range(0..=cap.min(slots.len()));
        for &t in &slots[..n] {
            let d = *p.dosage_sizes[m].choose(rng).expect("menus are non-empty");
            admins.push((m.clone(), d, t));
        }
    }
    if admins.is_empty() {
        let m = p.medicines.choose(rng).expect("at least one medicine").clone();
        let d = *p.dosage_sizes[&m].last().expect("menus are non-empty");
        admins.push((m, d, 0));
    }
    admins.sort_by(|a, b| a.2.cmp(&b.2).then_with(|| p.medicines.iter().position(|m| *m == a.0).cmp(&p.medicines.iter().position(|m| *m == b.0))));
    admins
}

/// Per-pair extremes of the witness trajectory over `0..=clear`.
fn extremes(p: &MedicationProblem, admins: &[(String, u32, Timestep)], clear: Timestep) -> BTreeMap<(String, String), (f64, f64)> {
    let mut history: BTreeMap<String, Vec<(Timestep, u32)>> = BTreeMap::new();
    let mut out: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    for t in 0..=clear {
        for (m, d, t0) in admins.iter().filter(|a| a.2 == t) {
            history.entry(m.clone()).or_default().push((*t0, *d));
        }
        for o in &p.organs {
            for prop in &p.properties {
                let mut v = p.initial_value(o, prop);
                for m in &p.medicines {
                    let key = (m.clone(), o.clone(), prop.clone());
                    if let Some(&e) = p.emax.get(&key) {
                        let c = concentration(p, &history, m, o, t).expect("known ids");
                        v += direct_effect(e, p.ec50[&key], c).expect("valid parameters");
                    }
                }
                let slot = out.entry((o.clone(), prop.clone())).or_insert((v, v));
                slot.0 = slot.0.min(v);
                slot.1 = slot.1.max(v);
            }
        }
    }
    out
}

/// Builds one instance and returns it with its certified witness plan.
pub fn gen_instance(rng: &mut ChaCha8Rng, spec: &SuiteSpec) -> Result<(MedicationProblem, Plan), SpecError> {
    spec.check()?;
    const TRIES: usize = 200;
    for _ in 0..TRIES {
        let mut p = skeleton(rng, spec);
        let admins = witness(rng, &p, spec.witness_window);
        let clear = admins.iter().map(|(m, _, t)| t + p.decay_times[m]).max().unwrap_or(0);
        let range = extremes(&p, &admins, clear);

        let mut any_goal = false;
        for ((o, prop), &(lo, hi)) in &range {
            let base = p.initial_value(o, prop);
            if prop.starts_with("relief") && hi > base + 1e-6 {
                let goal = base + round2(pick(rng, &spec.goal_fraction) * (hi - base));
                if goal > base {
                    p.goals.insert((o.clone(), prop.clone()), goal);
                    any_goal = true;
                }
            }
            if hi > base {
                let max = (hi * (1.0 + pick(rng, &spec.bound_margin)) * 100.0).ceil() / 100.0;
                p.property_constraints.insert((o.clone(), prop.clone()), Bounds::new(lo.min(base) - 1.0, max));
            }
        }
        if !any_goal {
            continue;
        }
        p.max_horizon = spec.horizon_slack.map(|s| clear + s);
        if p.validate().is_err() {
            continue;
        }
        let plan = Plan::from_administrations(&admins, clear);
        if validate_plan(&p, &plan).is_ok_and(|v| v.valid) {
            return Ok((p, plan));
        }
    }
    Err(SpecError::Unsatisfiable(TRIES))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteInstance {
    pub id: String,
    pub problem: MedicationProblem,
    pub witness: Plan,
}

/// `spec.count` certified instances, identical for identical `(spec, seed)`.
pub fn gen_synthetic_suite(spec: &SuiteSpec, seed: u64) -> Result<Vec<SuiteInstance>, SpecError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.count)
        .map(|i| {
            let (problem, witness) = gen_instance(&mut rng, spec)?;
            Ok(SuiteInstance {
                id: format!("{}-{:02}", spec.name, i + 1),
                problem,
                witness,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteMetadata {
    pub spec: SuiteSpec,
    pub seed: u64,
    pub instances: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<crate::transform::Transform>,
}

/// Writes `<id>.gmp.json` per instance plus `suite.json` metadata.
pub fn write_suite(
    dir: &Path,
    suite: &[SuiteInstance],
    spec: &SuiteSpec,
    seed: u64,
    transforms: &[crate::transform::Transform],
) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for inst in suite {
        let path = dir.join(format!("{}.gmp.json", inst.id));
        std::fs::write(&path, serialize_problem(&inst.problem))?;
        paths.push(path);
    }
    let meta = SuiteMetadata {
        spec: spec.clone(),
        seed,
        instances: suite.iter().map(|i| i.id.clone()).collect(),
        transforms: transforms.to_vec(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("suite.json"), text + "\n")?;
    Ok(paths)
}
