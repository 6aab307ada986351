use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use gmp_bench::montecarlo::{self, McConfig};
use gmp_bench::run::{self, PlannerConfig, ResultWriter, RunOptions};
use gmp_bench::{apply_transform, gen_synthetic_suite, SuiteSpec, Transform};
use gmp_core::planner::{exit, exit_code, parse_plan_json, ResultJson};
use gmp_core::{gbfs, parse_problem, serialize_problem, validate_plan, HeuristicKind, MedicationProblem, SearchLimits};
use gmp_forge::{
    auto_solve, build_prompt, default_domain_source, AutoConfig, AutoSolveError, BuildOptions, CargoBackend, ChatClient,
    CompiledPlanner, ForgeSettings, HeuristicGenerator, PlannerBackend, Profile, ScriptStep, ScriptedGenerator,
    SimulatedBackend, StopReason,
};
use serde_json::json;

/// Not solved, but the forge loop stopped on its generation cap.
const GENERATION_LIMIT: u8 = 1;
/// Endpoint, toolchain or I/O failure outside the planner itself.
const INFRASTRUCTURE: u8 = 7;

#[derive(Parser)]
#[command(name = "gmp", version, about = "Medication planning: search, validation, heuristic generation and benchmarks")]
struct Cli {
    /// TOML settings file; overrides GMP_* environment variables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with a built-in heuristic.
    Solve(SolveArgs),
    /// Check a plan against an instance.
    Validate { instance: PathBuf, plan: PathBuf },
    /// Ask the endpoint for one heuristic and print the generation record.
    GenHeuristic(GenArgs),
    /// Generate, compile and run heuristics until one solves the instance.
    Auto(AutoArgs),
    /// Run planner configurations over a suite directory.
    Bench(BenchArgs),
    /// Coverage distribution from an attempts table.
    Montecarlo(McArgs),
    /// Write a synthetic suite.
    MakeSuite(MakeSuiteArgs),
    /// Apply a transform to one instance.
    Transform(TransformArgs),
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "comprehensive")]
    heuristic: HeuristicKind,
    #[arg(long)]
    wall_time: Option<f64>,
    #[arg(long)]
    memory_cap: Option<u64>,
}

#[derive(Args, Clone)]
struct LimitFlags {
    #[arg(long)]
    wall_time: Option<f64>,
    #[arg(long)]
    time_slice: Option<f64>,
    #[arg(long)]
    memory_cap: Option<u64>,
    #[arg(long)]
    max_generations: Option<u32>,
}

#[derive(Args, Clone)]
struct EndpointFlags {
    /// Chat-completions base URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use these files as canned responses instead of calling the endpoint;
    /// the last one repeats.
    #[arg(long = "script")]
    scripts: Vec<PathBuf>,
    /// Generation latency charged per scripted response.
    #[arg(long, default_value_t = 0.0)]
    script_latency: f64,
}

#[derive(Args)]
struct GenArgs {
    /// Rust source shown to the model as the domain; defaults to the built-in model.
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Write the extracted code here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the prompt and exit without calling the endpoint.
    #[arg(long)]
    print_prompt: bool,
    #[command(flatten)]
    endpoint: EndpointFlags,
}

#[derive(Args)]
struct AutoArgs {
    instance: PathBuf,
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Decide compile and run outcomes from directives in the code instead of building.
    #[arg(long)]
    simulate: bool,
    #[arg(long)]
    workspace: Option<PathBuf>,
    /// Cargo profile for planner builds: debug or release.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    #[arg(long)]
    audit_dir: Option<PathBuf>,
    /// Append one row per attempt to this attempts CSV.
    #[arg(long)]
    attempts_csv: Option<PathBuf>,
    /// Domain label for attempts rows.
    #[arg(long, default_value = "default")]
    domain_label: String,
    #[command(flatten)]
    limits: LimitFlags,
    #[command(flatten)]
    endpoint: EndpointFlags,
}

#[derive(Args)]
struct BenchArgs {
    suite_dir: PathBuf,
    /// Built-in heuristics to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "zero,comprehensive")]
    heuristics: Vec<HeuristicKind>,
    /// Extra planner executables as NAME=PATH.
    #[arg(long = "planner")]
    planners: Vec<String>,
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    coverage_out: Option<PathBuf>,
    #[arg(long, default_value_t = run::DEFAULT_WORKERS)]
    workers: usize,
    #[arg(long)]
    wall_time: Option<f64>,
    #[arg(long)]
    memory_cap: Option<u64>,
}

#[derive(Args)]
struct McArgs {
    attempts: PathBuf,
    #[arg(long, default_value_t = 600.0)]
    budget: f64,
    #[arg(long, default_value_t = 100.0)]
    time_slice: f64,
    #[arg(long, default_value_t = 10_000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-iteration coverage CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quantile summary CSV.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Args)]
struct MakeSuiteArgs {
    out_dir: PathBuf,
    #[arg(long, default_value = "default")]
    preset: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    count: Option<usize>,
    /// Applied in order to every instance: tight, stretchK, shrinkK, medsK.
    #[arg(long = "transform")]
    transforms: Vec<Transform>,
}

#[derive(Args)]
struct TransformArgs {
    instance: PathBuf,
    transform: Transform,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed for medsK.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    match s {
        "debug" => Ok(Profile::Debug),
        "release" => Ok(Profile::Release),
        other => Err(format!("unknown profile `{other}` (debug, release)")),
    }
}

struct Failure {
    code: u8,
    message: String,
}

type Outcome = Result<u8, Failure>;

fn fail(code: impl TryInto<u8>, message: impl std::fmt::Display) -> Failure {
    Failure {
        code: code.try_into().unwrap_or(INFRASTRUCTURE),
        message: message.to_string(),
    }
}

fn io(e: impl std::fmt::Display) -> Failure {
    fail(INFRASTRUCTURE, e)
}

fn print(value: &serde_json::Value) {
    use std::io::Write;
    // A closed pipe (e.g. `| head`) is not an error worth a panic.
    let _ = writeln!(std::io::stdout().lock(), "{value}");
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(exit::BAD_INSTANCE, format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<MedicationProblem, Failure> {
    parse_problem(&read(path)?).map_err(|e| fail(exit::BAD_INSTANCE, format!("{}: {e}", path.display())))
}

fn settings(cli_config: Option<&Path>) -> Result<ForgeSettings, Failure> {
    let text = cli_config
        .map(|p| std::fs::read_to_string(p).map_err(|e| fail(exit::USAGE, format!("{}: {e}", p.display()))))
        .transpose()?;
    ForgeSettings::from_process_env(text.as_deref()).map_err(|e| fail(exit::USAGE, e))
}

fn apply_endpoint_flags(s: &mut ForgeSettings, f: &EndpointFlags) {
    let e = &mut s.endpoint;
    if let Some(v) = &f.endpoint {
        e.base_url = v.clone();
    }
    if let Some(v) = &f.model {
        e.model = v.clone();
    }
    if let Some(v) = f.temperature {
        e.temperature = v;
    }
    if f.seed.is_some() {
        e.seed = f.seed;
    }
}

fn generator(s: &ForgeSettings, f: &EndpointFlags) -> Result<Box<dyn HeuristicGenerator>, Failure> {
    if f.scripts.is_empty() {
        return Ok(Box::new(ChatClient::new(s.endpoint.clone())));
    }
    let steps = f
        .scripts
        .iter()
        .map(|p| {
            std::fs::read_to_string(p)
                .map(|response| ScriptStep {
                    response,
                    latency_s: f.script_latency,
                })
                .map_err(|e| fail(exit::USAGE, format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Box::new(ScriptedGenerator::new(steps)))
}

fn domain_source(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| fail(exit::USAGE, format!("{}: {e}", p.display()))),
        None => Ok(default_domain_source()),
    }
}

fn cmd_solve(a: &SolveArgs) -> Outcome {
    let problem = load_problem(&a.instance)?;
    let defaults = SearchLimits::default();
    let limits = SearchLimits::new(
        a.wall_time.unwrap_or(defaults.wall_time.as_secs_f64()),
        a.memory_cap.unwrap_or(defaults.memory_cap),
    )
    .map_err(|e| fail(exit::USAGE, e))?;
    let r = gbfs(&problem, a.heuristic.evaluator().as_ref(), limits);
    print(&serde_json::to_value(ResultJson::from_search(&r)).map_err(io)?);
    Ok(exit_code(r.status) as u8)
}

fn cmd_validate(instance: &Path, plan: &Path) -> Outcome {
    let problem = load_problem(instance)?;
    let plan = parse_plan_json(&problem, &read(plan)?).map_err(|e| fail(exit::USAGE, e))?;
    let verdict = validate_plan(&problem, &plan).map_err(|e| fail(exit::USAGE, e))?;
    print(&serde_json::to_value(&verdict).map_err(io)?);
    Ok(if verdict.valid { 0 } else { 1 })
}

fn cmd_gen(a: &GenArgs, config: Option<&Path>) -> Outcome {
    let prompt = build_prompt(&domain_source(a.domain.as_deref())?).map_err(|e| fail(exit::USAGE, e))?;
    if a.print_prompt {
        print(&json!({"system": prompt.system_text, "user": prompt.user_text}));
        return Ok(0);
    }
    let mut s = settings(config)?;
    apply_endpoint_flags(&mut s, &a.endpoint);
    let record = generator(&s, &a.endpoint)?.generate(&prompt).map_err(io)?;
    if let (Some(out), Some(code)) = (&a.out, &record.code) {
        std::fs::write(out, code).map_err(io)?;
    }
    print(&serde_json::to_value(&record).map_err(io)?);
    Ok(if record.code.is_some() { 0 } else { 1 })
}

fn cmd_auto(a: &AutoArgs, config: Option<&Path>) -> Outcome {
    let mut s = settings(config)?;
    apply_endpoint_flags(&mut s, &a.endpoint);
    let l = &mut s.limits;
    l.wall_time_s = a.limits.wall_time.unwrap_or(l.wall_time_s);
    l.time_slice_s = a.limits.time_slice.unwrap_or(l.time_slice_s);
    l.memory_cap = a.limits.memory_cap.unwrap_or(l.memory_cap);
    l.max_generations = a.limits.max_generations.unwrap_or(l.max_generations);
    if let Some(w) = &a.workspace {
        s.build.workspace = w.clone();
    }
    if let Some(p) = a.profile {
        s.build.profile = p;
    }

    let prompt = build_prompt(&domain_source(a.domain.as_deref())?).map_err(|e| fail(exit::USAGE, e))?;
    let auto = AutoConfig {
        budget: SearchLimits::new(s.limits.wall_time_s, s.limits.memory_cap).map_err(|e| fail(exit::USAGE, e))?,
        time_slice: Duration::try_from_secs_f64(s.limits.time_slice_s).map_err(|e| fail(exit::USAGE, e))?,
        max_generations: (s.limits.max_generations > 0).then_some(s.limits.max_generations),
        audit_dir: a.audit_dir.clone(),
    };
    let mut backend: Box<dyn PlannerBackend> = if a.simulate {
        Box::new(SimulatedBackend::default())
    } else {
        Box::new(CargoBackend {
            workspace: s.build.workspace.clone(),
            options: BuildOptions {
                profile: s.build.profile,
                offline: s.build.offline,
                ..BuildOptions::default()
            },
        })
    };
    let mut generator = generator(&s, &a.endpoint)?;

    let (report, code) = match auto_solve(&a.instance, &prompt, generator.as_mut(), backend.as_mut(), &auto) {
        Ok(r) => (r, 0),
        Err(e) => match (e.report().cloned(), &e) {
            (Some(r), AutoSolveError::BudgetExhausted(_)) => (r, exit::TIMEOUT as u8),
            (Some(r), AutoSolveError::GenerationLimit(_)) => (r, GENERATION_LIMIT),
            (Some(r), _) => {
                eprintln!("{e}");
                (r, INFRASTRUCTURE)
            }
            (None, AutoSolveError::Instance(_)) => return Err(fail(exit::BAD_INSTANCE, e)),
            (None, _) => return Err(io(e)),
        },
    };
    if let Some(path) = &a.attempts_csv {
        let mut rows = if path.exists() {
            montecarlo::read_attempts_file(path).map_err(io)?
        } else {
            Vec::new()
        };
        rows.extend(montecarlo::rows_from_report(&report, &a.domain_label));
        montecarlo::write_attempts(std::fs::File::create(path).map_err(io)?, &rows).map_err(io)?;
    }
    let classes: Vec<_> = report.attempts.iter().map(|x| x.outcome.classification).collect();
    print(&json!({
        "instance": report.instance,
        "stop": report.stop,
        "solved": report.stop == StopReason::Solved,
        "elapsed_s": report.elapsed_s,
        "attempts": classes,
        "ledger": report.ledger,
        "rates": report.ledger.rates().into_iter().map(|(c, r)| (c.to_string(), json!(r))).collect::<serde_json::Map<_, _>>(),
        "result": report.result,
    }));
    Ok(code)
}

fn cmd_bench(a: &BenchArgs) -> Outcome {
    let entries = run::discover(&a.suite_dir).map_err(|e| fail(exit::USAGE, format!("{}: {e}", a.suite_dir.display())))?;
    if entries.is_empty() {
        return Err(fail(exit::USAGE, format!("no *.gmp.json instances in {}", a.suite_dir.display())));
    }
    let mut configs: Vec<PlannerConfig> = a.heuristics.iter().map(|k| PlannerConfig::Builtin(*k)).collect();
    for spec in &a.planners {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| fail(exit::USAGE, format!("--planner expects NAME=PATH, got `{spec}`")))?;
        configs.push(PlannerConfig::External {
            name: name.into(),
            planner: CompiledPlanner {
                executable: PathBuf::from(path),
                source_digest: name.into(),
            },
        });
    }
    let defaults = SearchLimits::default();
    let limits = SearchLimits::new(
        a.wall_time.unwrap_or(defaults.wall_time.as_secs_f64()),
        a.memory_cap.unwrap_or(defaults.memory_cap),
    )
    .map_err(|e| fail(exit::USAGE, e))?;
    let suite = a.suite.clone().unwrap_or_else(|| {
        a.suite_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "suite".into())
    });
    let mut sink = ResultWriter::create(&a.out).map_err(io)?;
    let options = RunOptions { limits, workers: a.workers };
    let rows = run::run_suite(&suite, &entries, &configs, &options, Some(&mut sink)).map_err(io)?;
    drop(sink);
    // Rewrite in stable order once all rows are in.
    run::write_results(&a.out, &rows).map_err(io)?;
    let cov = run::coverage(&rows);
    if let Some(p) = &a.coverage_out {
        run::write_coverage(p, &cov).map_err(io)?;
    }
    print(&serde_json::to_value(&cov).map_err(io)?);
    Ok(0)
}

fn cmd_montecarlo(a: &McArgs) -> Outcome {
    let rows = montecarlo::read_attempts_file(&a.attempts).map_err(|e| fail(exit::USAGE, format!("{}: {e}", a.attempts.display())))?;
    let config = McConfig {
        budget_s: a.budget,
        time_slice_s: a.time_slice,
        iterations: a.iterations,
        seed: a.seed,
    };
    let report = montecarlo::monte_carlo_coverage(&rows, &config);
    if let Some(p) = &a.out {
        montecarlo::write_iterations(std::fs::File::create(p).map_err(io)?, &report.iterations).map_err(io)?;
    }
    if let Some(p) = &a.summary_out {
        montecarlo::write_summary(std::fs::File::create(p).map_err(io)?, &report.summary).map_err(io)?;
    }
    print(&serde_json::to_value(&report.summary).map_err(io)?);
    Ok(0)
}

fn cmd_make_suite(a: &MakeSuiteArgs) -> Outcome {
    let mut spec = match a.preset.as_str() {
        "default" => SuiteSpec::default(),
        "micro" => SuiteSpec::micro(),
        other => return Err(fail(exit::USAGE, format!("unknown preset `{other}` (default, micro)"))),
    };
    if let Some(n) = a.count {
        spec.count = n;
    }
    let mut suite = gen_synthetic_suite(&spec, a.seed).map_err(|e| fail(exit::USAGE, e))?;
    for inst in &mut suite {
        for t in &a.transforms {
            inst.problem = apply_transform(&inst.problem, t).map_err(|e| fail(exit::USAGE, format!("{}: {t}: {e}", inst.id)))?;
        }
    }
    let paths = gmp_bench::write_suite(&a.out_dir, &suite, &spec, a.seed, &a.transforms).map_err(io)?;
    print(&json!({"dir": a.out_dir, "instances": paths}));
    Ok(0)
}

fn cmd_transform(a: &TransformArgs) -> Outcome {
    let problem = load_problem(&a.instance)?;
    let mut t = a.transform.clone();
    if let (Transform::MedsTimes { seed, .. }, Some(s)) = (&mut t, a.seed) {
        *seed = s;
    }
    let out = apply_transform(&problem, &t).map_err(|e| fail(exit::USAGE, e))?;
    let text = serialize_problem(&out);
    match &a.out {
        Some(p) => std::fs::write(p, &text).map_err(io)?,
        None => {
            use std::io::Write;
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Validate { instance, plan } => cmd_validate(instance, plan),
        Command::GenHeuristic(a) => cmd_gen(a, config),
        Command::Auto(a) => cmd_auto(a, config),
        Command::Bench(a) => cmd_bench(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::MakeSuite(a) => cmd_make_suite(a),
        Command::Transform(a) => cmd_transform(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
