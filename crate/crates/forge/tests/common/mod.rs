#![allow(dead_code)]

use std::path::{Path, PathBuf};

use gmp_core::{parse_problem, MedicationProblem};
use gmp_forge::{BuildOptions, Profile};

pub const HOG: &str = "fn heuristic(problem: &MedicationProblem, state: &State) -> f64 {
    // Grabs and touches 200 MiB on every call.
    let block = vec![7u8; 200 << 20];
    std::mem::forget(block);
    1.0
}";

pub const BUSY: &str = "fn heuristic(problem: &MedicationProblem, state: &State) -> f64 {
    let mut x = 0u64;
    loop {
        x = std::hint::black_box(x.wrapping_add(1));
    }
}";

pub const PANICS: &str = "fn heuristic(problem: &MedicationProblem, state: &State) -> f64 {
    panic!(\"generated code gave up\")
}";

pub const SYNTAX_ERROR: &str = "fn heuristic(problem: &MedicationProblem, state: &State) -> f64 {
    let x = ;
    x
}";

pub const WRONG_SIGNATURE: &str = "fn heuristic(problem: &MedicationProblem) -> f64 {
    0.0
}";

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load(name: &str) -> MedicationProblem {
    parse_problem(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// Debug builds into a target dir shared by every forge test, so
/// dependencies compile once per checkout.
pub fn build_options() -> BuildOptions {
    BuildOptions {
        profile: Profile::Debug,
        target_dir: Some(Path::new(env!("CARGO_TARGET_TMPDIR")).join("forge-target")),
        ..BuildOptions::default()
    }
}

pub fn workspace(tag: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("forge-ws").join(tag);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
