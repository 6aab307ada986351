//! Offline coverage simulation over a table of recorded forge attempts.
//!
//! For each instance the recorded attempts are shuffled and replayed against
//! a wall-clock budget, as if the forge had drawn them in that order. Repeating
//! this with different orders gives a coverage distribution per domain.

use std::collections::BTreeMap;
use std::path::Path;

use gmp_forge::Classification;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const ATTEMPT_COLUMNS: [&str; 6] = ["heuristic", "instance", "gen_time_s", "compile_ok", "classification", "run_time_s"];
pub const ALL_DOMAINS: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRow {
    pub heuristic: String,
    /// `<domain>/<name>`; the domain is everything before the first `/`.
    pub instance: String,
    /// Generation latency plus compile time.
    pub gen_time_s: f64,
    pub compile_ok: bool,
    pub classification: Classification,
    pub run_time_s: f64,
}

impl AttemptRow {
    pub fn domain(&self) -> &str {
        domain_of(&self.instance)
    }
}

pub fn domain_of(instance: &str) -> &str {
    instance.split_once('/').map_or(instance, |(d, _)| d)
}

/// Attempts of one forge run as table rows. Compile time is folded into
/// `gen_time_s`; heuristics are named `<instance>#<index>`.
pub fn rows_from_report(report: &gmp_forge::SolveReport, domain: &str) -> Vec<AttemptRow> {
    report
        .attempts
        .iter()
        .map(|a| AttemptRow {
            heuristic: format!("{}#{}", a.instance, a.index),
            instance: format!("{domain}/{}", a.instance),
            gen_time_s: a.generation.latency_s + a.outcome.compile_time_s,
            compile_ok: a.outcome.classification != Classification::CompileError,
            classification: a.outcome.classification,
            run_time_s: a.outcome.run_time_s,
        })
        .collect()
}

pub fn read_attempts<R: std::io::Read>(reader: R) -> csv::Result<Vec<AttemptRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

pub fn read_attempts_file(path: &Path) -> csv::Result<Vec<AttemptRow>> {
    read_attempts(std::fs::File::open(path)?)
}

pub fn write_attempts<W: std::io::Write>(writer: W, rows: &[AttemptRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub budget_s: f64,
    pub time_slice_s: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            budget_s: 600.0,
            time_slice_s: 100.0,
            iterations: 10_000,
            seed: 0,
        }
    }
}

/// Replays one ordering of attempts. An attempt costs its generation time
/// plus its run time capped at the slice; it counts only if it succeeded
/// within the slice and before the budget ran out.
pub fn replay(order: &[&AttemptRow], budget_s: f64, slice_s: f64) -> bool {
    let mut elapsed = 0.0;
    for a in order {
        elapsed += a.gen_time_s;
        if elapsed > budget_s {
            return false;
        }
        let run = if a.compile_ok { a.run_time_s.min(slice_s) } else { 0.0 };
        let ok = a.compile_ok && a.classification == Classification::Success && a.run_time_s <= slice_s;
        if ok && elapsed + a.run_time_s <= budget_s {
            return true;
        }
        elapsed += run;
        if elapsed >= budget_s {
            return false;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub domain: String,
    pub iteration: usize,
    pub coverage: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub domain: String,
    pub instances: usize,
    pub min: f64,
    pub p1: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub p99: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub iterations: Vec<IterationRow>,
    pub summary: Vec<CoverageSummary>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(domain: &str, instances: usize, values: &[usize]) -> CoverageSummary {
    let mut v: Vec<f64> = values.iter().map(|&c| c as f64).collect();
    v.sort_by(f64::total_cmp);
    CoverageSummary {
        domain: domain.into(),
        instances,
        min: quantile(&v, 0.0),
        p1: quantile(&v, 0.01),
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        p99: quantile(&v, 0.99),
        max: quantile(&v, 1.0),
        mean: v.iter().sum::<f64>() / v.len().max(1) as f64,
    }
}

/// Coverage distribution per domain, plus an `all` row when there is more
/// than one domain. Identical inputs and seed give identical output.
pub fn monte_carlo_coverage(rows: &[AttemptRow], config: &McConfig) -> McReport {
    let mut by_instance: BTreeMap<&str, Vec<&AttemptRow>> = BTreeMap::new();
    for r in rows {
        by_instance.entry(&r.instance).or_default().push(r);
    }
    let mut domains: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in by_instance.keys() {
        *domains.entry(domain_of(inst)).or_default() += 1;
    }
    let with_all = domains.len() > 1;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut per_domain: BTreeMap<&str, Vec<usize>> = domains.keys().map(|d| (*d, Vec::new())).collect();
    let mut all = Vec::new();
    let mut iterations = Vec::new();
    for it in 0..config.iterations {
        let mut counts: BTreeMap<&str, usize> = domains.keys().map(|d| (*d, 0)).collect();
        for (inst, attempts) in &by_instance {
            let mut order = attempts.clone();
            order.shuffle(&mut rng);
            if replay(&order, config.budget_s, config.time_slice_s) {
                *counts.get_mut(domain_of(inst)).expect("domain indexed") += 1;
            }
        }
        let total: usize = counts.values().sum();
        for (d, c) in &counts {
            per_domain.get_mut(d).expect("domain indexed").push(*c);
            iterations.push(IterationRow {
                domain: d.to_string(),
                iteration: it,
                coverage: *c,
            });
        }
        if with_all {
            all.push(total);
            iterations.push(IterationRow {
                domain: ALL_DOMAINS.into(),
                iteration: it,
                coverage: total,
            });
        }
    }
    let mut summary: Vec<CoverageSummary> = per_domain
        .iter()
        .map(|(d, v)| summarize(d, domains[d], v))
        .collect();
    if with_all {
        summary.push(summarize(ALL_DOMAINS, by_instance.len(), &all));
    }
    McReport { iterations, summary }
}

pub fn write_iterations<W: std::io::Write>(writer: W, rows: &[IterationRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: std::io::Write>(writer: W, rows: &[CoverageSummary]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: Classification, gen: f64, run: f64) -> AttemptRow {
        AttemptRow {
            heuristic: "h".into(),
            instance: "d/x".into(),
            gen_time_s: gen,
            compile_ok: c != Classification::CompileError,
            classification: c,
            run_time_s: run,
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.25) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn replay_respects_budget_and_slice() {
        let ok = row(Classification::Success, 10.0, 50.0);
        let slow = row(Classification::Success, 10.0, 150.0);
        let oom = row(Classification::Oom, 10.0, 100.0);
        assert!(replay(&[&ok], 600.0, 100.0));
        assert!(!replay(&[&slow], 600.0, 100.0));
        assert!(!replay(&[&ok], 55.0, 100.0));
        let many: Vec<&AttemptRow> = std::iter::repeat_n(&oom, 5).chain([&ok]).collect();
        assert!(!replay(&many, 600.0, 100.0));
        assert!(replay(&many, 610.0, 100.0));
    }

    #[test]
    fn domains_split_on_first_slash() {
        assert_eq!(domain_of("synthetic/a-01"), "synthetic");
        assert_eq!(domain_of("bare"), "bare");
    }
}
