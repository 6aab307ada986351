/// Comprehensive heuristic, written against the domain types only so it can
/// be dropped into a planner template exactly like a generated heuristic.
///
/// Goals still open: slowest goal regimen + elimination time of the
/// strongest medicine + a penalty near safety bounds.
/// All goals latched: time until every dose has cleared.
fn heuristic(problem: &MedicationProblem, state: &State) -> f64 {
    if state.goals_remaining.is_empty() {
        return clearance_time_heuristic_helper(problem, state);
    }

    let mut slowest = 0.0_f64;
    for ((organ, property), required) in &state.goals_remaining {
        let current = state
            .organ_properties
            .get(&(organ.clone(), property.clone()))
            .copied()
            .unwrap_or(0.0);
        let t = goal_time_heuristic_helper(problem, state, organ, property, required - current);
        slowest = slowest.max(t);
    }

    slowest + future_clearance_heuristic_helper(problem, state) + safety_heuristic_helper(problem, state)
}

fn clearance_time_heuristic_helper(problem: &MedicationProblem, state: &State) -> f64 {
    let mut longest: i64 = 0;
    for medicine in &problem.medicines {
        let decay = *problem.decay_times.get(medicine).unwrap_or(&0);
        if let Some(doses) = state.medicine_history.get(medicine) {
            for &(t0, _) in doses {
                let remaining = decay - (state.timestamp - t0);
                if remaining > longest {
                    longest = remaining;
                }
            }
        }
    }
    longest as f64
}

fn best_medicine_heuristic_helper(problem: &MedicationProblem, organ: &str, property: &str) -> Option<(String, f64)> {
    let mut best: Option<(String, f64)> = None;
    let mut best_emax = 0.0_f64;
    for medicine in &problem.medicines {
        let key = (medicine.clone(), organ.to_string(), property.to_string());
        if let Some(&e) = problem.emax.get(&key) {
            if e > best_emax {
                best_emax = e;
                best = Some((medicine.clone(), e));
            }
        }
    }
    best
}

fn future_clearance_heuristic_helper(problem: &MedicationProblem, state: &State) -> f64 {
    let mut longest = 0.0_f64;
    for (organ, property) in state.goals_remaining.keys() {
        if let Some((medicine, _)) = best_medicine_heuristic_helper(problem, organ, property) {
            let decay = *problem.decay_times.get(&medicine).unwrap_or(&0);
            longest = longest.max(decay as f64);
        }
    }
    longest
}

fn exhausted_heuristic_helper(problem: &MedicationProblem, state: &State, medicine: &str) -> bool {
    let used = *state.medicine_doses_applied.get(medicine).unwrap_or(&0);
    let cap = *problem.usage_constraints.get(medicine).unwrap_or(&u32::MAX);
    used >= cap
}

fn peak_effect_heuristic_helper(problem: &MedicationProblem, medicine: &str, organ: &str, property: &str, emax: f64) -> f64 {
    let dose = problem
        .dosage_sizes
        .get(medicine)
        .and_then(|sizes| sizes.iter().max())
        .copied()
        .unwrap_or(1) as f64;
    let key = (medicine.to_string(), organ.to_string(), property.to_string());
    let ec50 = *problem.ec50.get(&key).unwrap_or(&1.0);
    emax * dose / (dose + ec50)
}

fn peak_time_heuristic_helper(problem: &MedicationProblem, medicine: &str, organ: &str) -> f64 {
    if let Some(profile) = problem.pk_profiles.get(medicine).and_then(|p| p.get(organ)) {
        let mut idx = 0;
        let mut top = 0.0_f64;
        for (i, &v) in profile.iter().enumerate() {
            if v > top {
                top = v;
                idx = i;
            }
        }
        return idx as f64;
    }
    let decay = *problem.decay_times.get(medicine).unwrap_or(&10);
    (decay as f64 / 3.0).max(1.0)
}

fn spacing_heuristic_helper(problem: &MedicationProblem, medicine: &str) -> f64 {
    let decay = *problem.decay_times.get(medicine).unwrap_or(&10);
    (decay as f64 / 2.0).max(1.0)
}

fn contribution_heuristic_helper(problem: &MedicationProblem, state: &State, medicine: &str, organ: &str, property: &str) -> f64 {
    let decay = *problem.decay_times.get(medicine).unwrap_or(&0);
    let mut level = 0.0_f64;
    if let Some(profile) = problem.pk_profiles.get(medicine).and_then(|p| p.get(organ)) {
        if let Some(doses) = state.medicine_history.get(medicine) {
            for &(t0, d) in doses {
                let elapsed = state.timestamp - t0;
                if elapsed >= 0 && elapsed < decay && (elapsed as usize) < profile.len() {
                    level += d as f64 * profile[elapsed as usize];
                }
            }
        }
    }
    if level <= 0.0 {
        return 0.0;
    }
    let key = (medicine.to_string(), organ.to_string(), property.to_string());
    let emax = *problem.emax.get(&key).unwrap_or(&0.0);
    let ec50 = *problem.ec50.get(&key).unwrap_or(&1.0);
    emax * level / (level + ec50)
}

fn goal_time_heuristic_helper(problem: &MedicationProblem, state: &State, organ: &str, property: &str, deficit: f64) -> f64 {
    if deficit <= 0.0 {
        return 0.0;
    }
    let (medicine, emax) = match best_medicine_heuristic_helper(problem, organ, property) {
        Some(best) => best,
        None => return 1000.0,
    };

    if exhausted_heuristic_helper(problem, state, &medicine) {
        // Cheapest plain regimen among the medicines still available.
        let mut fastest = 1000.0_f64;
        for other in &problem.medicines {
            if *other == medicine || exhausted_heuristic_helper(problem, state, other) {
                continue;
            }
            let key = (other.clone(), organ.to_string(), property.to_string());
            let e = *problem.emax.get(&key).unwrap_or(&0.0);
            if e <= 0.0 {
                continue;
            }
            let peak = peak_effect_heuristic_helper(problem, other, organ, property, e);
            if peak > 0.0 {
                let doses = (deficit / peak).ceil();
                let t = peak_time_heuristic_helper(problem, other, organ)
                    + (doses - 1.0) * spacing_heuristic_helper(problem, other);
                fastest = fastest.min(t);
            }
        }
        return fastest;
    }

    let peak = peak_effect_heuristic_helper(problem, &medicine, organ, property, emax);
    if peak <= 0.0 {
        return 1000.0;
    }
    let already = contribution_heuristic_helper(problem, state, &medicine, organ, property);
    let doses = ((deficit - already).max(0.0) / peak).ceil().max(1.0);
    peak_time_heuristic_helper(problem, &medicine, organ) + (doses - 1.0) * spacing_heuristic_helper(problem, &medicine)
}

fn safety_heuristic_helper(problem: &MedicationProblem, state: &State) -> f64 {
    let mut penalty = 0.0_f64;
    for (key, bounds) in &problem.property_constraints {
        let range = bounds.max - bounds.min;
        if range <= 0.0 {
            continue;
        }
        let value = match state.organ_properties.get(key) {
            Some(v) => *v,
            None => continue,
        };
        let from_min = (value - bounds.min) / range;
        let from_max = (bounds.max - value) / range;
        if from_min < 0.2 {
            penalty += (0.2 - from_min) * 5.0;
        }
        if from_max < 0.2 {
            penalty += (0.2 - from_max) * 5.0;
        }
    }
    penalty
}
