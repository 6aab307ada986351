use gmp_bench::{apply_transform, gen_instance, SuiteSpec, Transform};
use gmp_core::{gbfs, parse_problem, validate_plan, ComprehensiveHeuristic, MedicationProblem, SearchLimits, SearchStatus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn micro() -> MedicationProblem {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/micro.gmp.json")).unwrap();
    parse_problem(&text).unwrap()
}

fn instance(seed: u64, spec: &SuiteSpec) -> MedicationProblem {
    gen_instance(&mut ChaCha8Rng::seed_from_u64(seed), spec).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shrink_undoes_stretch(seed in any::<u64>(), k in 1u32..6) {
        let p = instance(seed, &SuiteSpec::default());
        let s = apply_transform(&p, &Transform::Stretch { k }).unwrap();
        for m in &p.medicines {
            prop_assert_eq!(s.decay(m), p.decay(m) * i64::from(k));
        }
        prop_assert_eq!(s.max_horizon, p.max_horizon.map(|h| h * i64::from(k)));
        let back = apply_transform(&s, &Transform::Shrink { k }).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn meds_times_one_is_identity(seed in any::<u64>(), noise_seed in any::<u64>()) {
        let p = instance(seed, &SuiteSpec::default());
        let t = Transform::MedsTimes { k: 1, perturbation: 0.05, seed: noise_seed };
        prop_assert_eq!(apply_transform(&p, &t).unwrap(), p);
    }

    #[test]
    fn meds_times_copies_stay_within_perturbation(seed in any::<u64>(), k in 2u32..5) {
        let p = instance(seed, &SuiteSpec::default());
        let q = apply_transform(&p, &Transform::MedsTimes { k, perturbation: 0.05, seed }).unwrap();
        prop_assert_eq!(q.medicines.len(), p.medicines.len() * k as usize);
        for ((m, o, prop), e) in &q.emax {
            let base = m.split("_v").next().unwrap();
            let e0 = p.emax[&(base.to_string(), o.clone(), prop.clone())];
            prop_assert!((e / e0 - 1.0).abs() <= 0.05 + 1e-12);
        }
    }
}

#[test]
fn meds_times_four_turns_seven_medicines_into_twenty_eight() {
    let spec = SuiteSpec {
        medicines: 7..=7,
        ..SuiteSpec::default()
    };
    let p = instance(7, &spec);
    assert_eq!(p.medicines.len(), 7);
    let q = apply_transform(&p, &"meds4".parse().unwrap()).unwrap();
    assert_eq!(q.medicines.len(), 28);
    assert_eq!(&q.medicines[..4], ["drug0", "drug0_v1", "drug0_v2", "drug0_v3"]);
    assert_eq!(q.usage_constraints["drug3_v2"], p.usage_constraints["drug3"]);
}

#[test]
fn tight_sets_upper_bound_just_above_goal() {
    let q = apply_transform(&micro(), &"tight".parse().unwrap()).unwrap();
    let key = ("liver".to_string(), "relief".to_string());
    assert!((q.property_constraints[&key].max - 5.05).abs() < 1e-12);
    assert_eq!(q.property_constraints[&key].min, 0.0);
}

#[test]
fn stretched_micro_is_still_solvable_and_plans_validate() {
    let p = micro();
    for t in ["stretch2", "stretch4", "meds2"] {
        let q = apply_transform(&p, &t.parse().unwrap()).unwrap();
        let r = gbfs(&q, &ComprehensiveHeuristic, SearchLimits::new(30.0, 1 << 30).unwrap());
        assert_eq!(r.status, SearchStatus::Solved, "{t}");
        assert!(validate_plan(&q, r.plan.as_ref().unwrap()).unwrap().valid, "{t}");
    }
}

#[test]
fn tight_micro_leaves_no_dose_in_the_window() {
    let q = apply_transform(&micro(), &"tight".parse().unwrap()).unwrap();
    let r = gbfs(&q, &ComprehensiveHeuristic, SearchLimits::new(30.0, 1 << 30).unwrap());
    assert_eq!(r.status, SearchStatus::Exhausted);
}

#[test]
fn zero_factor_is_rejected() {
    assert!(apply_transform(&micro(), &Transform::Stretch { k: 0 }).is_err());
    assert!(apply_transform(&micro(), &Transform::Shrink { k: 0 }).is_err());
}
