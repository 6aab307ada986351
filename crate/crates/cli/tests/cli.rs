use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn gmp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gmp"));
    for (k, _) in std::env::vars() {
        if k.starts_with("GMP_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(cmd: &mut Command) -> (i32, Value, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    let out = String::from_utf8_lossy(&stdout);
    let value = out.lines().last().and_then(|l| serde_json::from_str(l).ok()).unwrap_or(Value::Null);
    (status.code().unwrap_or(-1), value, String::from_utf8_lossy(&stderr).into_owned())
}

#[test]
fn solve_prints_result_json_and_exit_codes() {
    let (code, v, _) = run(gmp().args(["solve"]).arg(fixture("micro.gmp.json")));
    assert_eq!(code, 0);
    assert_eq!(v["status"], "solved");
    assert_eq!(v["cost"], 5);
    assert_eq!(v["plan"].as_array().unwrap().len(), 2);
    let (code, v, _) = run(gmp().args(["solve", "--heuristic", "zero"]).arg(fixture("unsolvable.gmp.json")));
    assert_eq!(code, 1);
    assert_eq!(v["status"], "exhausted");
}

#[test]
fn validate_accepts_solver_plans_and_rejects_empty_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = gmp().args(["solve"]).arg(fixture("micro.gmp.json")).output().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, &out.stdout).unwrap();
    let (code, v, _) = run(gmp().arg("validate").arg(fixture("micro.gmp.json")).arg(&plan));
    assert_eq!((code, v["valid"].as_bool()), (0, Some(true)));

    std::fs::write(&plan, "[]").unwrap();
    let (code, v, _) = run(gmp().arg("validate").arg(fixture("micro.gmp.json")).arg(&plan));
    assert_eq!(code, 1);
    assert_eq!(v["failure"]["reason"], "GoalNeverReached");

    std::fs::write(&plan, r#"[["A", 3, 0]]"#).unwrap();
    let (code, v, _) = run(gmp().arg("validate").arg(fixture("micro.gmp.json")).arg(&plan));
    assert_eq!(code, 1);
    assert_eq!(v["failure"]["reason"], "DosageNotAllowed");
}

#[test]
fn usage_and_instance_errors_have_distinct_codes() {
    assert_eq!(run(gmp().arg("frobnicate")).0, 2);
    assert_eq!(run(gmp().args(["solve", "--heuristic", "magic"]).arg(fixture("micro.gmp.json"))).0, 2);
    assert_eq!(run(gmp().args(["transform"]).arg(fixture("micro.gmp.json")).arg("double")).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.gmp.json");
    std::fs::write(&bad, "{\"medicines\": []}").unwrap();
    let (code, _, err) = run(gmp().arg("solve").arg(&bad));
    assert_eq!(code, 6, "{err}");
    assert_eq!(run(gmp().arg("solve").arg(dir.path().join("missing.json"))).0, 6);
}

#[test]
fn transform_writes_a_valid_instance() {
    let out = gmp().arg("transform").arg(fixture("micro.gmp.json")).arg("stretch2").output().unwrap();
    assert!(out.status.success());
    let p: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(p["decay_times"], json!({"A": 6, "B": 4}));
    assert_eq!(p["max_horizon"], 12);
    let out = gmp().arg("transform").arg(fixture("micro.gmp.json")).args(["meds4", "--seed", "3"]).output().unwrap();
    let p: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(p["medicines"].as_array().unwrap().len(), 8);
}

#[test]
fn make_suite_then_bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("micro");
    let (code, v, _) = run(gmp().arg("make-suite").arg(&suite).args(["--preset", "micro", "--count", "4", "--seed", "8"]));
    assert_eq!(code, 0);
    assert_eq!(v["instances"].as_array().unwrap().len(), 4);
    assert!(suite.join("suite.json").is_file());

    let results = dir.path().join("results.csv");
    let coverage = dir.path().join("coverage.csv");
    let (code, v, err) = run(gmp()
        .arg("bench")
        .arg(&suite)
        .arg("--out")
        .arg(&results)
        .arg("--coverage-out")
        .arg(&coverage)
        .args(["--workers", "2", "--wall-time", "30", "--memory-cap", "1073741824"]));
    assert_eq!(code, 0, "{err}");
    assert_eq!(v[0]["config"], "zero");
    assert_eq!(v[1]["solved"], 4);
    let text = std::fs::read_to_string(&results).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("suite,instance,config,status,cost,wall_time_s,expanded"));
    assert_eq!(lines.count(), 8);
    assert!(std::fs::read_to_string(&coverage).unwrap().starts_with("suite,config,solved,total,total_time_s\n"));
}

#[test]
fn montecarlo_reads_attempts_and_writes_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let iters = dir.path().join("iterations.csv");
    let summary = dir.path().join("summary.csv");
    let (code, v, _) = run(gmp()
        .arg("montecarlo")
        .arg(fixture("attempts.csv"))
        .args(["--iterations", "200", "--seed", "1"])
        .arg("--out")
        .arg(&iters)
        .arg("--summary-out")
        .arg(&summary));
    assert_eq!(code, 0);
    let domains: Vec<&str> = v.as_array().unwrap().iter().map(|s| s["domain"].as_str().unwrap()).collect();
    assert_eq!(domains, ["stretch4", "synthetic", "all"]);
    assert_eq!(v[0]["max"], 0.0);
    let text = std::fs::read_to_string(&iters).unwrap();
    assert!(text.starts_with("domain,iteration,coverage\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 200);
    assert!(std::fs::read_to_string(&summary).unwrap().starts_with("domain,instances,min,p1,q1,median,q3,p99,max,mean\n"));
}

#[test]
fn gen_heuristic_prints_prompt_and_uses_scripts() {
    let (code, v, _) = run(gmp().args(["gen-heuristic", "--print-prompt"]));
    assert_eq!(code, 0);
    let user = v["user"].as_str().unwrap();
    assert!(user.contains("pub struct MedicationProblem"));
    assert!(!user.contains("[RUST_DOMAIN_DEFINITION]"));

    let dir = tempfile::tempdir().unwrap();
    let response = dir.path().join("response.md");
    std::fs::write(&response, "Here:\n```rust\nfn heuristic(p: &MedicationProblem, s: &State) -> f64 { 0.0 }\n```\n").unwrap();
    let code_out = dir.path().join("h.rs");
    let (code, v, _) = run(gmp().arg("gen-heuristic").arg("--script").arg(&response).arg("--out").arg(&code_out));
    assert_eq!(code, 0);
    assert_eq!(v["request"]["model"], "scripted");
    assert!(std::fs::read_to_string(&code_out).unwrap().starts_with("fn heuristic"));

    std::fs::write(&response, "no code here").unwrap();
    assert_eq!(run(gmp().arg("gen-heuristic").arg("--script").arg(&response)).0, 1);
}

/// Loopback chat endpoint that records request bodies.
fn mock_endpoint(replies: usize) -> (String, Arc<Mutex<Vec<Value>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming().take(replies) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(serde_json::from_slice(&body).unwrap());
            let reply = json!({
                "choices": [{"message": {"content": "```rust\nfn heuristic(p: &MedicationProblem, s: &State) -> f64 { 1.0 }\n```"}}],
                "usage": {"prompt_tokens": 10, "completion_tokens": 5}
            })
            .to_string();
            let head = format!("HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", reply.len());
            stream.write_all(head.as_bytes()).unwrap();
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, seen)
}

#[test]
fn settings_precedence_is_flags_then_file_then_env() {
    let (url, seen) = mock_endpoint(3);
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("gmp.toml");
    std::fs::write(&config, "[endpoint]\nmodel = \"from-file\"\nmax_retries = 0\n").unwrap();

    // Environment alone.
    let (code, v, err) = run(gmp().arg("gen-heuristic").env("GMP_ENDPOINT_URL", &url).env("GMP_MODEL", "from-env"));
    assert_eq!(code, 0, "{err}");
    assert_eq!(v["request"]["model"], "from-env");
    // File beats environment.
    let (code, v, _) = run(gmp()
        .arg("--config")
        .arg(&config)
        .arg("gen-heuristic")
        .env("GMP_ENDPOINT_URL", &url)
        .env("GMP_MODEL", "from-env"));
    assert_eq!(code, 0);
    assert_eq!(v["request"]["model"], "from-file");
    // Flags beat both; the env URL is unreachable and must be overridden.
    let (code, v, _) = run(gmp()
        .arg("--config")
        .arg(&config)
        .args(["gen-heuristic", "--model", "from-flag", "--endpoint", &url])
        .env("GMP_ENDPOINT_URL", "http://127.0.0.1:9/v1"));
    assert_eq!(code, 0);
    assert_eq!(v["request"]["model"], "from-flag");
    assert_eq!(v["tokens"]["input"], 10);

    let models: Vec<Value> = seen.lock().unwrap().iter().map(|b| b["model"].clone()).collect();
    assert_eq!(models, [json!("from-env"), json!("from-file"), json!("from-flag")]);
}

#[test]
fn unreachable_endpoint_is_an_infrastructure_error() {
    let (code, _, err) = run(gmp().args(["gen-heuristic", "--endpoint", "http://127.0.0.1:9/v1"]).env("GMP_API_KEY_ENV", "GMP_TEST_NO_KEY"));
    assert_eq!(code, 7, "{err}");
}

#[test]
fn auto_simulated_loop_records_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let fail = dir.path().join("fail.md");
    let ok = dir.path().join("ok.md");
    std::fs::write(&fail, "```rust\n// compile: fail 3\n```").unwrap();
    std::fs::write(&ok, "```rust\n// run: Success 2\n```").unwrap();
    let attempts = dir.path().join("attempts.csv");
    let audit = dir.path().join("audit");
    let (code, v, err) = run(gmp()
        .args(["auto", "--simulate", "--script-latency", "10"])
        .arg(fixture("micro.gmp.json"))
        .arg("--script")
        .arg(&fail)
        .arg("--script")
        .arg(&ok)
        .arg("--attempts-csv")
        .arg(&attempts)
        .arg("--audit-dir")
        .arg(&audit)
        .args(["--domain-label", "micro"]));
    assert_eq!(code, 0, "{err}");
    assert_eq!(v["stop"], "solved");
    assert_eq!(v["attempts"], json!(["CompileError", "Success"]));
    assert_eq!(v["elapsed_s"], 25.0);
    assert_eq!(v["result"]["status"], "solved");
    let text = std::fs::read_to_string(&attempts).unwrap();
    assert_eq!(
        text,
        "heuristic,instance,gen_time_s,compile_ok,classification,run_time_s\n\
         micro#1,micro/micro,13.0,false,CompileError,0.0\n\
         micro#2,micro/micro,10.0,true,Success,2.0\n"
    );
    assert_eq!(std::fs::read_to_string(audit.join("micro.jsonl")).unwrap().lines().count(), 2);
}

#[test]
fn auto_exit_codes_follow_the_stop_reason() {
    let dir = tempfile::tempdir().unwrap();
    let oom = dir.path().join("oom.md");
    std::fs::write(&oom, "```rust\n// run: OOM 40\n```").unwrap();
    let (code, v, _) = run(gmp()
        .args(["auto", "--simulate", "--script-latency", "20"])
        .arg(fixture("micro.gmp.json"))
        .arg("--script")
        .arg(&oom));
    assert_eq!(code, 3);
    assert_eq!(v["stop"], "budget_exhausted");
    assert!(v["elapsed_s"].as_f64().unwrap() >= 600.0);
    let rates: f64 = v["rates"].as_object().unwrap().values().map(|r| r.as_f64().unwrap()).sum();
    assert!((rates - 1.0).abs() < 1e-9);

    let (code, v, _) = run(gmp()
        .args(["auto", "--simulate", "--max-generations", "4"])
        .arg(fixture("micro.gmp.json"))
        .arg("--script")
        .arg(&oom));
    assert_eq!(code, 1);
    assert_eq!(v["attempts"].as_array().unwrap().len(), 4);

    assert_eq!(run(gmp().args(["auto", "--simulate"]).arg(dir.path().join("missing.gmp.json")).arg("--script").arg(&oom)).0, 6);
}
