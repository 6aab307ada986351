//! Problem and state data model, plus the canonical `.gmp.json` instance format.
//!
//! Composite keys are `(organ, property)` and `(medicine, organ, property)`
//! tuples in memory and nested objects on disk:
//!
//! ```json
//! { "emax": { "A": { "liver": { "relief": 8.0 } } } }
//! ```
//!
//! The `property` slot of an `(organ, property)` key may also name a
//! medicine, in which case it refers to that medicine's concentration at the
//! organ. Goals and safety constraints can be placed on either kind.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::ProblemError;

/// Discrete simulation time. Signed so that elapsed-time arithmetic in
/// heuristics never underflows.
pub type Timestep = i64;

/// One allowed dose size, in integer units.
pub type Dosage = u32;

/// `(organ, property)`.
pub type SiteKey = (String, String);

/// `(medicine, organ, property)`.
pub type EffectKey = (String, String, String);

/// Inclusive safety range for one `(organ, property)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Self {
        Bounds { min, max }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }
}

/// Immutable description of one patient's medication planning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MedicationProblem {
    pub medicines: Vec<String>,
    pub organs: Vec<String>,
    pub properties: Vec<String>,
    /// Timesteps after which a single dose no longer contributes anywhere.
    pub decay_times: BTreeMap<String, Timestep>,
    /// medicine → organ → fraction of the dose present `i` steps after administration.
    pub pk_profiles: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    pub emax: BTreeMap<EffectKey, f64>,
    pub ec50: BTreeMap<EffectKey, f64>,
    /// Strictly increasing menu of dose sizes per medicine.
    pub dosage_sizes: BTreeMap<String, Vec<Dosage>>,
    /// Maximum number of administrations per medicine over the whole plan.
    pub usage_constraints: BTreeMap<String, u32>,
    pub property_constraints: BTreeMap<SiteKey, Bounds>,
    pub initial_properties: BTreeMap<SiteKey, f64>,
    /// Lower-bound target levels that must be reached at some point.
    pub goals: BTreeMap<SiteKey, f64>,
    pub max_horizon: Option<Timestep>,
}

impl MedicationProblem {
    /// Effective horizon: the explicit bound, or enough time to give every
    /// allowed dose one full elimination period and then clear.
    pub fn horizon(&self) -> Timestep {
        if let Some(h) = self.max_horizon {
            return h;
        }
        let spaced: Timestep = self
            .medicines
            .iter()
            .map(|m| {
                let cap = Timestep::from(*self.usage_constraints.get(m).unwrap_or(&0));
                cap * self.decay(m)
            })
            .sum();
        let longest = self.medicines.iter().map(|m| self.decay(m)).max().unwrap_or(0);
        spaced + longest
    }

    pub fn decay(&self, medicine: &str) -> Timestep {
        self.decay_times.get(medicine).copied().unwrap_or(0)
    }

    pub fn is_medicine(&self, id: &str) -> bool {
        self.medicines.iter().any(|m| m == id)
    }

    pub fn is_organ(&self, id: &str) -> bool {
        self.organs.iter().any(|o| o == id)
    }

    /// Baseline value of a pair. Unlisted pairs and concentrations start at 0.
    pub fn initial_value(&self, organ: &str, property: &str) -> f64 {
        self.initial_properties
            .get(&(organ.to_string(), property.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn profile(&self, medicine: &str, organ: &str) -> Option<&[f64]> {
        self.pk_profiles
            .get(medicine)
            .and_then(|by_organ| by_organ.get(organ))
            .map(Vec::as_slice)
    }

    /// Checks every structural invariant of the instance.
    pub fn validate(&self) -> Result<(), ProblemError> {
        check_id_list("medicines", &self.medicines)?;
        check_id_list("organs", &self.organs)?;
        check_id_list("properties", &self.properties)?;
        if self.medicines.is_empty() {
            return Err(ProblemError::invariant("at least one medicine is required"));
        }
        if self.organs.is_empty() {
            return Err(ProblemError::invariant("at least one organ is required"));
        }
        let meds: BTreeSet<&str> = self.medicines.iter().map(String::as_str).collect();
        let organs: BTreeSet<&str> = self.organs.iter().map(String::as_str).collect();
        let props: BTreeSet<&str> = self.properties.iter().map(String::as_str).collect();
        if let Some(clash) = meds.intersection(&props).next() {
            return Err(ProblemError::invariant(format!(
                "`{clash}` is both a medicine and a property"
            )));
        }

        for (name, keys) in [
            ("decay_times", self.decay_times.keys().collect::<Vec<_>>()),
            ("pk_profiles", self.pk_profiles.keys().collect()),
            ("dosage_sizes", self.dosage_sizes.keys().collect()),
            ("usage_constraints", self.usage_constraints.keys().collect()),
        ] {
            if let Some(unknown) = keys.iter().find(|k| !meds.contains(k.as_str())) {
                return Err(ProblemError::invariant(format!(
                    "{name} mentions unknown medicine `{unknown}`"
                )));
            }
        }

        for m in &self.medicines {
            match self.decay_times.get(m) {
                None => {
                    return Err(ProblemError::invariant(format!("no decay time for `{m}`")));
                }
                Some(d) if *d <= 0 => {
                    return Err(ProblemError::invariant(format!(
                        "decay time of `{m}` must be positive, got {d}"
                    )));
                }
                _ => {}
            }
            match self.dosage_sizes.get(m) {
                None => {
                    return Err(ProblemError::invariant(format!("no dosage sizes for `{m}`")));
                }
                Some(sizes) => {
                    if sizes.is_empty() {
                        return Err(ProblemError::invariant(format!(
                            "dosage sizes of `{m}` are empty"
                        )));
                    }
                    if sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(ProblemError::invariant(format!(
                            "dosage sizes of `{m}` must be positive and strictly increasing"
                        )));
                    }
                }
            }
            if !self.usage_constraints.contains_key(m) {
                return Err(ProblemError::invariant(format!("no usage constraint for `{m}`")));
            }
        }

        for (m, by_organ) in &self.pk_profiles {
            let decay = self.decay(m);
            for (o, traj) in by_organ {
                if !organs.contains(o.as_str()) {
                    return Err(ProblemError::invariant(format!(
                        "pk_profiles of `{m}` mentions unknown organ `{o}`"
                    )));
                }
                if (traj.len() as Timestep) < decay {
                    return Err(ProblemError::invariant(format!(
                        "trajectory of `{m}` at `{o}` has {} entries, shorter than decay time {decay}",
                        traj.len()
                    )));
                }
                for (i, v) in traj.iter().enumerate() {
                    if !v.is_finite() || *v < 0.0 {
                        return Err(ProblemError::invariant(format!(
                            "trajectory of `{m}` at `{o}` has invalid entry {v} at index {i}"
                        )));
                    }
                    if i as Timestep >= decay && *v != 0.0 {
                        return Err(ProblemError::invariant(format!(
                            "trajectory of `{m}` at `{o}` is nonzero at index {i}, past decay time {decay}"
                        )));
                    }
                }
            }
        }

        let emax_keys: BTreeSet<&EffectKey> = self.emax.keys().collect();
        let ec50_keys: BTreeSet<&EffectKey> = self.ec50.keys().collect();
        if let Some(k) = emax_keys.symmetric_difference(&ec50_keys).next() {
            return Err(ProblemError::invariant(format!(
                "emax/ec50 key ({}, {}, {}) is present in only one of the two maps",
                k.0, k.1, k.2
            )));
        }
        for (k, v) in &self.emax {
            let (m, o, p) = k;
            if !meds.contains(m.as_str()) || !organs.contains(o.as_str()) || !props.contains(p.as_str())
            {
                return Err(ProblemError::invariant(format!(
                    "effect key ({m}, {o}, {p}) references an unknown medicine, organ or property"
                )));
            }
            if !v.is_finite() {
                return Err(ProblemError::invariant(format!("emax ({m}, {o}, {p}) is not finite")));
            }
            let ec = self.ec50[k];
            if !ec.is_finite() || ec <= 0.0 {
                return Err(ProblemError::invariant(format!(
                    "ec50 ({m}, {o}, {p}) must be positive, got {ec}"
                )));
            }
        }

        let site_ok = |(o, p): &SiteKey| {
            organs.contains(o.as_str()) && (props.contains(p.as_str()) || meds.contains(p.as_str()))
        };
        for (k, b) in &self.property_constraints {
            if !site_ok(k) {
                return Err(ProblemError::invariant(format!(
                    "constraint on unknown pair ({}, {})",
                    k.0, k.1
                )));
            }
            if !b.min.is_finite() || !b.max.is_finite() || b.min > b.max {
                return Err(ProblemError::invariant(format!(
                    "constraint on ({}, {}) has invalid bounds [{}, {}]",
                    k.0, k.1, b.min, b.max
                )));
            }
        }
        for (k, v) in &self.initial_properties {
            if !organs.contains(k.0.as_str()) || !props.contains(k.1.as_str()) {
                return Err(ProblemError::invariant(format!(
                    "initial value for unknown pair ({}, {})",
                    k.0, k.1
                )));
            }
            if !v.is_finite() {
                return Err(ProblemError::invariant(format!(
                    "initial value for ({}, {}) is not finite",
                    k.0, k.1
                )));
            }
        }
        for (k, req) in &self.goals {
            if !site_ok(k) {
                return Err(ProblemError::invariant(format!(
                    "goal on unknown pair ({}, {})",
                    k.0, k.1
                )));
            }
            if !req.is_finite() {
                return Err(ProblemError::invariant(format!(
                    "goal level for ({}, {}) is not finite",
                    k.0, k.1
                )));
            }
            if let Some(b) = self.property_constraints.get(k) {
                let init = self.initial_value(&k.0, &k.1);
                if !b.contains(init) {
                    return Err(ProblemError::invariant(format!(
                        "initial value {init} of goal pair ({}, {}) lies outside [{}, {}]",
                        k.0, k.1, b.min, b.max
                    )));
                }
                if !b.contains(*req) {
                    return Err(ProblemError::invariant(format!(
                        "goal level {req} of ({}, {}) lies outside [{}, {}]",
                        k.0, k.1, b.min, b.max
                    )));
                }
            }
        }
        if let Some(h) = self.max_horizon {
            if h <= 0 {
                return Err(ProblemError::invariant(format!(
                    "max_horizon must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

fn check_id_list(name: &str, ids: &[String]) -> Result<(), ProblemError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(ProblemError::invariant(format!("{name} contains an empty identifier")));
        }
        if !seen.insert(id) {
            return Err(ProblemError::invariant(format!("{name} lists `{id}` twice")));
        }
    }
    Ok(())
}

/// Search node payload.
///
/// `organ_properties` holds every tracked `(organ, property)` value at
/// `timestamp`; entries whose property is a medicine id are that medicine's
/// concentration. It is derived data and is excluded from state identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientState {
    pub timestamp: Timestep,
    /// medicine → `(dose_time, dosage)` in administration order.
    pub medicine_history: BTreeMap<String, Vec<(Timestep, Dosage)>>,
    pub medicine_doses_applied: BTreeMap<String, u32>,
    pub organ_properties: BTreeMap<SiteKey, f64>,
    /// Goals not yet latched, with their required levels.
    pub goals_remaining: BTreeMap<SiteKey, f64>,
}

/// Name used for the state type in the heuristic contract.
pub type State = PatientState;

impl PatientState {
    pub fn value(&self, organ: &str, property: &str) -> Option<f64> {
        self.organ_properties
            .get(&(organ.to_string(), property.to_string()))
            .copied()
    }

    pub fn doses_applied(&self, medicine: &str) -> u32 {
        self.medicine_doses_applied.get(medicine).copied().unwrap_or(0)
    }

    /// True when no dose of `medicine` is recorded at the current timestamp.
    pub fn free_this_step(&self, medicine: &str) -> bool {
        self.medicine_history
            .get(medicine)
            .map_or(true, |h| h.iter().all(|(t, _)| *t != self.timestamp))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Administer { medicine: String, dosage: Dosage },
    Wait,
}

/// `adm(m, d, t)` or a one-step wait starting at `applied_at`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdministrationAction {
    pub kind: ActionKind,
    pub applied_at: Timestep,
}

impl AdministrationAction {
    pub fn administer(medicine: impl Into<String>, dosage: Dosage, at: Timestep) -> Self {
        AdministrationAction {
            kind: ActionKind::Administer {
                medicine: medicine.into(),
                dosage,
            },
            applied_at: at,
        }
    }

    pub fn wait(at: Timestep) -> Self {
        AdministrationAction {
            kind: ActionKind::Wait,
            applied_at: at,
        }
    }

    pub fn is_wait(&self) -> bool {
        matches!(self.kind, ActionKind::Wait)
    }
}

impl std::fmt::Display for AdministrationAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            ActionKind::Administer { medicine, dosage } => {
                write!(f, "adm({medicine}, {dosage}, {})", self.applied_at)
            }
            ActionKind::Wait => write!(f, "wait({})", self.applied_at),
        }
    }
}

/// Totally ordered action sequence with unit action costs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plan {
    pub actions: Vec<AdministrationAction>,
    /// Timestamp of the final state.
    pub makespan: Timestep,
}

impl Plan {
    pub fn cost(&self) -> usize {
        self.actions.len()
    }

    /// Administrations only, as `(medicine, dosage, timestep)` triples.
    pub fn administrations(&self) -> Vec<(String, Dosage, Timestep)> {
        self.actions
            .iter()
            .filter_map(|a| match &a.kind {
                ActionKind::Administer { medicine, dosage } => {
                    Some((medicine.clone(), *dosage, a.applied_at))
                }
                ActionKind::Wait => None,
            })
            .collect()
    }

    /// Rebuilds the full action list from administration triples, inserting
    /// one wait per elapsed timestep up to `makespan`.
    pub fn from_administrations(
        admins: &[(String, Dosage, Timestep)],
        makespan: Timestep,
    ) -> Plan {
        let mut actions = Vec::with_capacity(admins.len() + makespan.max(0) as usize);
        let mut now = 0;
        for (m, d, t) in admins {
            while now < *t {
                actions.push(AdministrationAction::wait(now));
                now += 1;
            }
            actions.push(AdministrationAction::administer(m.clone(), *d, *t));
        }
        while now < makespan {
            actions.push(AdministrationAction::wait(now));
            now += 1;
        }
        Plan { actions, makespan }
    }
}

const TOP_LEVEL_KEYS: [&str; 13] = [
    "decay_times",
    "dosage_sizes",
    "ec50",
    "emax",
    "goals",
    "initial_properties",
    "max_horizon",
    "medicines",
    "organs",
    "pk_profiles",
    "properties",
    "property_constraints",
    "usage_constraints",
];

/// Parses and validates a `.gmp.json` instance.
pub fn parse_problem(json_text: &str) -> Result<MedicationProblem, ProblemError> {
    let root: Value =
        serde_json::from_str(json_text).map_err(|e| ProblemError::Parse(e.to_string()))?;
    let top = as_object(&root, "$")?;
    for key in top.keys() {
        if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
            return Err(ProblemError::schema(format!("$.{key}"), "unknown field"));
        }
    }
    let field = |name: &str| -> Result<&Value, ProblemError> {
        top.get(name)
            .ok_or_else(|| ProblemError::schema(format!("$.{name}"), "missing field"))
    };

    let problem = MedicationProblem {
        medicines: string_list(field("medicines")?, "$.medicines")?,
        organs: string_list(field("organs")?, "$.organs")?,
        properties: string_list(field("properties")?, "$.properties")?,
        decay_times: keyed(field("decay_times")?, "$.decay_times", |v, p| {
            Ok(Timestep::from(as_u32(v, p)?))
        })?,
        pk_profiles: keyed(field("pk_profiles")?, "$.pk_profiles", |v, p| {
            keyed(v, p, |traj, p| {
                let items = as_array(traj, p)?;
                items
                    .iter()
                    .enumerate()
                    .map(|(i, x)| as_f64(x, &format!("{p}[{i}]")))
                    .collect()
            })
        })?,
        emax: triple_keyed(field("emax")?, "$.emax")?,
        ec50: triple_keyed(field("ec50")?, "$.ec50")?,
        dosage_sizes: keyed(field("dosage_sizes")?, "$.dosage_sizes", |v, p| {
            as_array(v, p)?
                .iter()
                .enumerate()
                .map(|(i, x)| as_u32(x, &format!("{p}[{i}]")))
                .collect()
        })?,
        usage_constraints: keyed(field("usage_constraints")?, "$.usage_constraints", as_u32)?,
        property_constraints: pair_keyed(
            field("property_constraints")?,
            "$.property_constraints",
            |v, p| {
                let obj = as_object(v, p)?;
                for k in obj.keys() {
                    if k != "min" && k != "max" {
                        return Err(ProblemError::schema(format!("{p}.{k}"), "unknown field"));
                    }
                }
                let min = obj
                    .get("min")
                    .ok_or_else(|| ProblemError::schema(format!("{p}.min"), "missing field"))?;
                let max = obj
                    .get("max")
                    .ok_or_else(|| ProblemError::schema(format!("{p}.max"), "missing field"))?;
                Ok(Bounds {
                    min: as_f64(min, &format!("{p}.min"))?,
                    max: as_f64(max, &format!("{p}.max"))?,
                })
            },
        )?,
        initial_properties: pair_keyed(
            field("initial_properties")?,
            "$.initial_properties",
            as_f64,
        )?,
        goals: pair_keyed(field("goals")?, "$.goals", as_f64)?,
        max_horizon: match top.get("max_horizon") {
            None | Some(Value::Null) => None,
            Some(v) => Some(Timestep::from(as_u32(v, "$.max_horizon")?)),
        },
    };
    problem.validate()?;
    Ok(problem)
}

/// Canonical JSON: object keys sorted, shortest round-trip float formatting,
/// two-space indentation, trailing newline.
pub fn serialize_problem(problem: &MedicationProblem) -> String {
    let ids = |v: &[String]| Value::Array(v.iter().cloned().map(Value::String).collect());
    let num = |x: f64| Value::from(x);

    let mut top = Map::new();
    // Inserted in sorted order so output is sorted with or without `preserve_order`.
    top.insert(
        "decay_times".into(),
        object(problem.decay_times.iter().map(|(k, v)| (k.clone(), Value::from(*v)))),
    );
    top.insert(
        "dosage_sizes".into(),
        object(problem.dosage_sizes.iter().map(|(k, v)| {
            (k.clone(), Value::Array(v.iter().map(|d| Value::from(*d)).collect()))
        })),
    );
    top.insert("ec50".into(), triple_object(&problem.ec50));
    top.insert("emax".into(), triple_object(&problem.emax));
    top.insert("goals".into(), pair_object(&problem.goals, |v| num(*v)));
    top.insert(
        "initial_properties".into(),
        pair_object(&problem.initial_properties, |v| num(*v)),
    );
    if let Some(h) = problem.max_horizon {
        top.insert("max_horizon".into(), Value::from(h));
    }
    top.insert("medicines".into(), ids(&problem.medicines));
    top.insert("organs".into(), ids(&problem.organs));
    top.insert(
        "pk_profiles".into(),
        object(problem.pk_profiles.iter().map(|(m, by_organ)| {
            (
                m.clone(),
                object(by_organ.iter().map(|(o, traj)| {
                    (o.clone(), Value::Array(traj.iter().map(|x| num(*x)).collect()))
                })),
            )
        })),
    );
    top.insert("properties".into(), ids(&problem.properties));
    top.insert(
        "property_constraints".into(),
        pair_object(&problem.property_constraints, |b| {
            let mut m = Map::new();
            m.insert("max".into(), num(b.max));
            m.insert("min".into(), num(b.min));
            Value::Object(m)
        }),
    );
    top.insert(
        "usage_constraints".into(),
        object(problem.usage_constraints.iter().map(|(k, v)| (k.clone(), Value::from(*v)))),
    );
    let mut text = serde_json::to_string_pretty(&Value::Object(top))
        .expect("problem values are always representable as JSON");
    text.push('\n');
    text
}

fn object(entries: impl Iterator<Item = (String, Value)>) -> Value {
    let mut sorted: Vec<(String, Value)> = entries.collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    Value::Object(sorted.into_iter().collect())
}

fn pair_object<T>(map: &BTreeMap<SiteKey, T>, f: impl Fn(&T) -> Value) -> Value {
    let mut nested: BTreeMap<&str, Vec<(String, Value)>> = BTreeMap::new();
    for ((o, p), v) in map {
        nested.entry(o).or_default().push((p.clone(), f(v)));
    }
    object(
        nested
            .into_iter()
            .map(|(o, inner)| (o.to_string(), object(inner.into_iter()))),
    )
}

fn triple_object(map: &BTreeMap<EffectKey, f64>) -> Value {
    let mut nested: BTreeMap<&str, BTreeMap<&str, Vec<(String, Value)>>> = BTreeMap::new();
    for ((m, o, p), v) in map {
        nested
            .entry(m)
            .or_default()
            .entry(o)
            .or_default()
            .push((p.clone(), Value::from(*v)));
    }
    object(nested.into_iter().map(|(m, by_organ)| {
        (
            m.to_string(),
            object(
                by_organ
                    .into_iter()
                    .map(|(o, inner)| (o.to_string(), object(inner.into_iter()))),
            ),
        )
    }))
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ProblemError> {
    v.as_object()
        .ok_or_else(|| ProblemError::schema(path, format!("expected object, found {}", type_name(v))))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ProblemError> {
    v.as_array()
        .ok_or_else(|| ProblemError::schema(path, format!("expected array, found {}", type_name(v))))
}

fn as_f64(v: &Value, path: &str) -> Result<f64, ProblemError> {
    v.as_f64()
        .ok_or_else(|| ProblemError::schema(path, format!("expected number, found {}", type_name(v))))
}

fn as_u32(v: &Value, path: &str) -> Result<u32, ProblemError> {
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .ok_or_else(|| {
            ProblemError::schema(path, format!("expected non-negative integer, found {v}"))
        })
}

fn string_list(v: &Value, path: &str) -> Result<Vec<String>, ProblemError> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_str().map(str::to_string).ok_or_else(|| {
                ProblemError::schema(
                    format!("{path}[{i}]"),
                    format!("expected string, found {}", type_name(x)),
                )
            })
        })
        .collect()
}

fn keyed<T>(
    v: &Value,
    path: &str,
    f: impl Fn(&Value, &str) -> Result<T, ProblemError>,
) -> Result<BTreeMap<String, T>, ProblemError> {
    as_object(v, path)?
        .iter()
        .map(|(k, inner)| Ok((k.clone(), f(inner, &format!("{path}.{k}"))?)))
        .collect()
}

fn pair_keyed<T>(
    v: &Value,
    path: &str,
    f: impl Fn(&Value, &str) -> Result<T, ProblemError>,
) -> Result<BTreeMap<SiteKey, T>, ProblemError> {
    let mut out = BTreeMap::new();
    for (o, inner) in as_object(v, path)? {
        let p1 = format!("{path}.{o}");
        for (p, leaf) in as_object(inner, &p1)? {
            out.insert((o.clone(), p.clone()), f(leaf, &format!("{p1}.{p}"))?);
        }
    }
    Ok(out)
}

fn triple_keyed(v: &Value, path: &str) -> Result<BTreeMap<EffectKey, f64>, ProblemError> {
    let mut out = BTreeMap::new();
    for (m, by_organ) in as_object(v, path)? {
        let p1 = format!("{path}.{m}");
        for (o, by_prop) in as_object(by_organ, &p1)? {
            let p2 = format!("{p1}.{o}");
            for (p, leaf) in as_object(by_prop, &p2)? {
                out.insert(
                    (m.clone(), o.clone(), p.clone()),
                    as_f64(leaf, &format!("{p2}.{p}"))?,
                );
            }
        }
    }
    Ok(out)
}
