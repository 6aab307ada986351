//! Heuristic generators: a chat-completion HTTP client and scripted stubs.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ForgeError;
use crate::extract::extract_code;
use crate::prompt::PromptBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub model: String,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
    pub reasoning: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub request: RequestMeta,
    pub raw_response: String,
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub tokens: TokenUsage,
    pub latency_s: f64,
    pub cost_usd: f64,
}

impl GenerationRecord {
    /// Builds a record, running code extraction on the response.
    pub fn new(request: RequestMeta, raw_response: String, tokens: TokenUsage, latency_s: f64, cost_usd: f64) -> Self {
        let (code, warnings) = match extract_code(&raw_response) {
            Ok(e) => (Some(e.code), e.warnings),
            Err(e) => (None, vec![e.to_string()]),
        };
        GenerationRecord {
            request,
            raw_response,
            code,
            warnings,
            tokens,
            latency_s,
            cost_usd,
        }
    }
}

pub trait HeuristicGenerator {
    fn generate(&mut self, prompt: &PromptBundle) -> Result<GenerationRecord, ForgeError>;
}

/// One canned response and the generation latency it is charged.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub response: String,
    pub latency_s: f64,
}

impl ScriptStep {
    pub fn code(code: &str, latency_s: f64) -> Self {
        ScriptStep {
            response: format!("```rust\n{code}\n```"),
            latency_s,
        }
    }
}

/// Replays canned responses in order; the last one repeats forever.
/// Latency is charged to the accounting clock, not slept.
#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    steps: VecDeque<ScriptStep>,
    last: Option<ScriptStep>,
    pub calls: usize,
}

impl ScriptedGenerator {
    pub fn new(steps: Vec<ScriptStep>) -> Self {
        ScriptedGenerator {
            steps: steps.into(),
            last: None,
            calls: 0,
        }
    }
}

impl HeuristicGenerator for ScriptedGenerator {
    fn generate(&mut self, _: &PromptBundle) -> Result<GenerationRecord, ForgeError> {
        let step = match self.steps.pop_front() {
            Some(s) => {
                self.last = Some(s.clone());
                s
            }
            None => self.last.clone().ok_or_else(|| ForgeError::Endpoint {
                attempts: 1,
                message: "script is empty".into(),
            })?,
        };
        self.calls += 1;
        let meta = RequestMeta {
            model: "scripted".into(),
            temperature: 0.0,
            seed: None,
        };
        Ok(GenerationRecord::new(meta, step.response, TokenUsage::default(), step.latency_s, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL; requests go to `<base_url>/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_s: f64,
    /// Extra attempts after a failed request.
    pub max_retries: u32,
    pub usd_per_mtok_input: f64,
    pub usd_per_mtok_output: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            temperature: 1.0,
            seed: None,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_s: 300.0,
            max_retries: 2,
            usd_per_mtok_input: 0.0,
            usd_per_mtok_output: 0.0,
        }
    }
}

pub struct ChatClient {
    pub config: EndpointConfig,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        ChatClient { config, agent }
    }

    fn request_body(&self, prompt: &PromptBundle) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        });
        if let Some(seed) = self.config.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn post_once(&self, body: &Value) -> Result<Value, String> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("HTTP {}: {}", status.as_u16(), text.chars().take(500).collect::<String>()));
        }
        serde_json::from_str(&text).map_err(|e| format!("response is not JSON: {e}"))
    }
}

/// Content and token counts of a chat-completion response body.
pub fn parse_chat_response(body: &Value) -> Result<(String, TokenUsage), String> {
    let content = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or("response has no choices[0].message.content")?;
    let count = |p: &str| body.pointer(p).and_then(Value::as_u64).unwrap_or(0);
    let tokens = TokenUsage {
        input: count("/usage/prompt_tokens"),
        output: count("/usage/completion_tokens"),
        reasoning: count("/usage/completion_tokens_details/reasoning_tokens"),
    };
    Ok((content.to_string(), tokens))
}

impl HeuristicGenerator for ChatClient {
    fn generate(&mut self, prompt: &PromptBundle) -> Result<GenerationRecord, ForgeError> {
        let body = self.request_body(prompt);
        let started = Instant::now();
        let mut last_error = String::new();
        let attempts = self.config.max_retries + 1;
        for _ in 0..attempts {
            match self.post_once(&body).and_then(|v| parse_chat_response(&v)) {
                Ok((content, tokens)) => {
                    let c = &self.config;
                    let cost = (tokens.input as f64 * c.usd_per_mtok_input
                        + tokens.output as f64 * c.usd_per_mtok_output)
                        / 1e6;
                    let meta = RequestMeta {
                        model: c.model.clone(),
                        temperature: c.temperature,
                        seed: c.seed,
                    };
                    return Ok(GenerationRecord::new(meta, content, tokens, started.elapsed().as_secs_f64(), cost));
                }
                Err(e) => last_error = e,
            }
        }
        Err(ForgeError::Endpoint {
            attempts,
            message: last_error,
        })
    }
}
