use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agent::parse::resolve_object;
use crate::agent::FactorClaim;
use crate::env::{
    generate_task, policy_rng, EpisodeState, Factor, Object, Observation, RuleKind, TaskConfig,
};
use crate::error::BackendError;
use crate::hypothesis::{HypothesisSet, HypothesisSpace};
use crate::policy::optimal_decide;

/// Line separating consecutive responses in a script file.
pub const SCRIPT_SEPARATOR: &str = "---8<---";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

pub trait ModelBackend: Send + Sync {
    fn label(&self) -> String;

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError>;
}

/// Replays canned responses in order.
#[derive(Debug)]
pub struct ScriptedBackend {
    responses: Vec<String>,
    next: Mutex<usize>,
    label: String,
}

impl ScriptedBackend {
    pub fn new(responses: Vec<String>) -> Self {
        ScriptedBackend {
            responses,
            next: Mutex::new(0),
            label: "scripted".to_string(),
        }
    }

    pub fn parse_script(text: &str) -> Vec<String> {
        let mut out = vec![String::new()];
        for line in text.lines() {
            if line.trim() == SCRIPT_SEPARATOR {
                out.push(String::new());
            } else {
                let cur = out.last_mut().expect("never empty");
                cur.push_str(line);
                cur.push('\n');
            }
        }
        out.into_iter()
            .map(|r| r.trim().to_string())
            .filter(|r| !r.is_empty())
            .collect()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let mut backend = ScriptedBackend::new(ScriptedBackend::parse_script(&text));
        backend.label = format!("scripted:{}", path.display());
        Ok(backend)
    }

    pub fn consumed(&self) -> usize {
        *self.next.lock().expect("lock poisoned")
    }
}

impl ModelBackend for ScriptedBackend {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn complete(&self, _prompt: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        let mut next = self.next.lock().expect("lock poisoned");
        let response = self
            .responses
            .get(*next)
            .cloned()
            .ok_or(BackendError::Exhausted(self.responses.len()))?;
        *next += 1;
        Ok(response)
    }
}

/// Answers task prompts the way the greedy information-gain policy would,
/// reading the observation history back out of the prompt text.
pub struct OracleBackend {
    config: TaskConfig,
    space: Arc<HypothesisSpace>,
    rng: Mutex<ChaCha8Rng>,
}

impl OracleBackend {
    pub fn new(config: &TaskConfig) -> Self {
        OracleBackend {
            config: config.clone(),
            space: Arc::new(HypothesisSpace::new(config)),
            rng: Mutex::new(policy_rng(config.seed)),
        }
    }

    fn history_from_prompt(&self, prompt: &str) -> Result<Vec<(usize, u8)>, BackendError> {
        let mut out = Vec::new();
        for line in prompt.lines() {
            let Some(rest) = line.trim().strip_prefix("Step ") else {
                continue;
            };
            let Some((_, rest)) = rest.split_once(": picked up ") else {
                continue;
            };
            let Some((phrase, reward)) = rest.rsplit_once(" and received reward ") else {
                continue;
            };
            let reward: u8 = reward
                .trim()
                .parse()
                .map_err(|_| BackendError::Protocol(format!("bad reward in `{line}`")))?;
            let id = resolve_object(phrase, &self.config, self.space.universe())
                .map_err(|e| BackendError::Protocol(e.to_string()))?;
            out.push((id, reward));
        }
        Ok(out)
    }

    fn answer(&self, prompt: &str) -> Result<String, BackendError> {
        let mut state: EpisodeState =
            generate_task(&self.config).map_err(|e| BackendError::Config(e.to_string()))?;
        let mut hyps = HypothesisSet::full(self.space.clone());
        for (id, reward) in self.history_from_prompt(prompt)? {
            let step_index = state.history().len() + 1;
            state
                .step(id)
                .map_err(|e| BackendError::Protocol(e.to_string()))?;
            hyps = hyps
                .observe(&Observation {
                    object_id: id,
                    reward,
                    step_index,
                })
                .map_err(|e| BackendError::Protocol(e.to_string()))?;
        }
        let decision = {
            let mut rng = self.rng.lock().expect("lock poisoned");
            optimal_decide(&state, &hyps, &mut rng)
                .map_err(|e| BackendError::Protocol(e.to_string()))?
        };
        let (claim, winning) = if hyps.is_sufficient() {
            let rule = hyps
                .alive_rules()
                .next()
                .expect("sufficient sets are non-empty");
            (claim_for(&rule.factors()), rule.target_string())
        } else {
            (FactorClaim::Unsure, "unknown".to_string())
        };
        let action = decision.object_id.map(|id| &state.universe()[id]);
        let reasoning = decision
            .rationale
            .unwrap_or_else(|| "Only one labeling remains.".to_string());
        Ok(format_response(
            self.config.rule_kind,
            action,
            decision.stop,
            claim,
            &winning,
            &reasoning,
        ))
    }
}

/// Renders a reply in the requested response format.
pub fn format_response(
    kind: RuleKind,
    action: Option<&Object>,
    stop: bool,
    claim: FactorClaim,
    winning: &str,
    reasoning: &str,
) -> String {
    let factor_label = match kind {
        RuleKind::SingleFeature => "Which factor influence reward?",
        RuleKind::Conjunction => "Which combination of factors influence reward?",
    };
    let action = match action {
        Some(obj) => format!("pick up {}", obj.description_with_article()),
        None => "none".to_string(),
    };
    format!(
        "* Action: {action}\n* Stop: {}\n*\n* {factor_label} {}\n* WINNING COMBINATION: {winning}\n\n{reasoning}",
        if stop { "YES" } else { "NO" },
        claim.as_label(),
    )
}

fn claim_for(factors: &[Factor]) -> FactorClaim {
    match factors {
        [Factor::Color] => FactorClaim::Color,
        [Factor::Shape] => FactorClaim::Shape,
        [Factor::Color, Factor::Shape] => FactorClaim::ColorShape,
        [Factor::Color, Factor::Texture] => FactorClaim::ColorTexture,
        [Factor::Shape, Factor::Texture] => FactorClaim::ShapeTexture,
        _ => FactorClaim::Unsure,
    }
}

impl ModelBackend for OracleBackend {
    fn label(&self) -> String {
        "oracle".to_string()
    }

    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        // review prompts: accept the proposal unchanged
        if prompt.starts_with("Task: You are tasked with exploring") {
            if let Some(idx) = prompt.rfind("SOLUTION: ") {
                return Ok(prompt[idx + "SOLUTION: ".len()..].to_string());
            }
        }
        self.answer(prompt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiFormat {
    /// `POST {endpoint}` with a chat-completions body, bearer token auth.
    #[default]
    OpenaiChat,
    /// `POST {endpoint}` with a generateContent body, `x-goog-api-key` auth.
    GeminiGenerate,
}

/// Remote model over HTTP. The token is read from the environment at
/// construction and never serialized.
pub struct HttpBackend {
    format: ApiFormat,
    endpoint: String,
    model: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(
        format: ApiFormat,
        endpoint: &str,
        model: &str,
        token: Option<String>,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend {
            format,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            token,
            client,
        })
    }

    fn body(&self, prompt: &str, params: &DecodingParams) -> Value {
        match self.format {
            ApiFormat::OpenaiChat => json!({
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
            }),
            ApiFormat::GeminiGenerate => json!({
                "contents": [{"role": "user", "parts": [{"text": prompt}]}],
                "generationConfig": {
                    "temperature": params.temperature,
                    "maxOutputTokens": params.max_tokens,
                },
            }),
        }
    }

    fn extract(&self, body: &Value) -> Option<String> {
        match self.format {
            ApiFormat::OpenaiChat => body["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string),
            ApiFormat::GeminiGenerate => {
                let parts = body["candidates"][0]["content"]["parts"].as_array()?;
                let text: String = parts.iter().filter_map(|p| p["text"].as_str()).collect();
                Some(text)
            }
        }
    }
}

impl ModelBackend for HttpBackend {
    fn label(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        let mut request = self
            .client
            .post(&self.endpoint)
            .json(&self.body(prompt, params));
        if let Some(token) = &self.token {
            request = match self.format {
                ApiFormat::OpenaiChat => request.bearer_auth(token),
                ApiFormat::GeminiGenerate => request.header("x-goog-api-key", token),
            };
        }
        let map_err = |e: reqwest::Error| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        };
        let response = request.send().map_err(map_err)?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Transport(format!("status {status}")));
        }
        let body: Value = response
            .json()
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        self.extract(&body)
            .ok_or_else(|| BackendError::Protocol("response has no completion text".into()))
    }
}

/// Serializable description of a backend, instantiated once per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Oracle,
    /// Reads `<dir>/<condition>/<episode>.txt`, falling back to `<dir>/<episode>.txt`.
    Scripted {
        dir: PathBuf,
    },
    Http {
        #[serde(default)]
        format: ApiFormat,
        endpoint: String,
        model: String,
        /// Name of the environment variable holding the API token.
        #[serde(default)]
        token_env: Option<String>,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_timeout_secs() -> u64 {
    120
}

impl BackendSpec {
    pub fn build(
        &self,
        config: &TaskConfig,
        condition: &str,
        episode: usize,
    ) -> Result<Box<dyn ModelBackend>, BackendError> {
        match self {
            BackendSpec::Oracle => Ok(Box::new(OracleBackend::new(config))),
            BackendSpec::Scripted { dir } => {
                let nested = dir.join(condition).join(format!("{episode}.txt"));
                let path = if nested.exists() {
                    nested
                } else {
                    dir.join(format!("{episode}.txt"))
                };
                Ok(Box::new(ScriptedBackend::from_file(path)?))
            }
            BackendSpec::Http {
                format,
                endpoint,
                model,
                token_env,
                timeout_secs,
            } => {
                let token = match token_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        BackendError::Config(format!("environment variable {var} is not set"))
                    })?),
                    None => None,
                };
                Ok(Box::new(HttpBackend::new(
                    *format,
                    endpoint,
                    model,
                    token,
                    Duration::from_secs(*timeout_secs),
                )?))
            }
        }
    }
}
