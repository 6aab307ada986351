//! Builds a standalone planner executable around a heuristic source.
//!
//! Each build gets its own cargo package under the workspace directory. The
//! heuristic is `include!`d into a fixed `main.rs`, so the generated code
//! sits at module scope with the domain types glob-imported. All packages
//! share one target directory, so dependencies compile once.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::ForgeError;

const MAIN_RS: &str = r#"#![allow(unused_imports, unused_variables, unused_mut, dead_code)]
use gmp_core::prelude::*;
use std::collections::*;

include!("heuristic.rs");

fn main() {
    let entry: fn(&MedicationProblem, &State) -> f64 = heuristic;
    std::process::exit(gmp_core::planner::run_cli(entry));
}
"#;

/// Path of the core crate this forge was built against.
pub fn core_crate_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("..").join("core")
}

fn default_lockfile() -> Option<PathBuf> {
    let lock = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../Cargo.lock");
    lock.is_file().then_some(lock)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Debug,
    Release,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub cargo: PathBuf,
    pub profile: Profile,
    /// Build without touching the network; needs a lockfile and a warm cache.
    pub offline: bool,
    pub core_dir: PathBuf,
    pub lockfile: Option<PathBuf>,
    /// Shared across builds; defaults to `<workspace>/target`.
    pub target_dir: Option<PathBuf>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            cargo: std::env::var_os("CARGO").map_or_else(|| PathBuf::from("cargo"), PathBuf::from),
            profile: Profile::Release,
            offline: true,
            core_dir: core_crate_dir(),
            lockfile: default_lockfile(),
            target_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledPlanner {
    pub executable: PathBuf,
    pub source_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompileResult {
    Built(CompiledPlanner),
    Failed { diagnostics: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompileReport {
    pub result: CompileResult,
    pub compile_time_s: f64,
}

fn digest(code: &str) -> String {
    let mut h = DefaultHasher::new();
    code.hash(&mut h);
    MAIN_RS.hash(&mut h);
    format!("{:016x}", h.finish())
}

fn manifest(name: &str, core_dir: &Path) -> String {
    format!(
        "[package]\nname = \"{name}\"\nversion = \"0.0.0\"\nedition = \"2021\"\npublish = false\n\n\
         [dependencies]\ngmp-core = {{ path = {core:?} }}\n\n\
         [profile.release]\ndebug = false\n\n[workspace]\n",
        core = core_dir.display().to_string(),
    )
}

/// Writes the package for `heuristic_code` and runs `cargo build` on it.
pub fn compile_planner(heuristic_code: &str, workspace: &Path, options: &BuildOptions) -> Result<CompileReport, ForgeError> {
    let started = Instant::now();
    let id = digest(heuristic_code);
    let name = format!("planner-{id}");
    let package = workspace.join(&name);
    std::fs::create_dir_all(package.join("src"))?;
    let core_dir = options.core_dir.canonicalize().unwrap_or_else(|_| options.core_dir.clone());
    std::fs::write(package.join("Cargo.toml"), manifest(&name, &core_dir))?;
    std::fs::write(package.join("src/main.rs"), MAIN_RS)?;
    std::fs::write(package.join("src/heuristic.rs"), heuristic_code)?;
    if let Some(lock) = &options.lockfile {
        std::fs::copy(lock, package.join("Cargo.lock"))?;
    }

    let target_dir = options.target_dir.clone().unwrap_or_else(|| workspace.join("target"));
    let mut cmd = Command::new(&options.cargo);
    cmd.arg("build")
        .arg("--quiet")
        .arg("--manifest-path")
        .arg(package.join("Cargo.toml"))
        .arg("--target-dir")
        .arg(&target_dir)
        .env_remove("RUSTFLAGS")
        .env("CARGO_TERM_COLOR", "never");
    if options.profile == Profile::Release {
        cmd.arg("--release");
    }
    if options.offline {
        cmd.arg("--offline");
    }
    let output = cmd.output().map_err(|e| match e.kind() {
        ErrorKind::NotFound => ForgeError::ToolchainMissing(options.cargo.display().to_string()),
        _ => ForgeError::Io(e),
    })?;
    let compile_time_s = started.elapsed().as_secs_f64();
    if !output.status.success() {
        return Ok(CompileReport {
            result: CompileResult::Failed {
                diagnostics: String::from_utf8_lossy(&output.stderr).into_owned(),
            },
            compile_time_s,
        });
    }

    let profile_dir = match options.profile {
        Profile::Debug => "debug",
        Profile::Release => "release",
    };
    let built = target_dir.join(profile_dir).join(&name);
    let bin_dir = workspace.join("bin");
    std::fs::create_dir_all(&bin_dir)?;
    let executable = bin_dir.join(&name);
    // Copy out so a later build in the shared target dir cannot replace it.
    std::fs::copy(&built, &executable)?;
    Ok(CompileReport {
        result: CompileResult::Built(CompiledPlanner {
            executable,
            source_digest: id,
        }),
        compile_time_s,
    })
}
