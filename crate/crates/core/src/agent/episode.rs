use std::sync::Arc;
use std::time::Instant;

use crate::agent::parse::{parse_response, ParsedResponse};
use crate::agent::template::{render_prompt, render_template, Templates};
use crate::agent::{DecodingParams, ModelBackend, PromptVariant};
use crate::env::{generate_task, TaskConfig};
use crate::error::{BackendError, ParseError};
use crate::hypothesis::{steps_to_sufficiency, HypothesisSet, HypothesisSpace};
use crate::trajectory::{AgentTurn, Failure, FailureKind, StepRecord, Termination, Trajectory};

pub const FORMAT_REMINDER: &str = "Your previous reply could not be used. Reply again using exactly this format, naming one object from the room that you have not picked up yet:\n\n* Action: pick up <object>\n* Stop: <YES> or <NO>";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Re-prompts after an unusable reply.
    pub format_retries: usize,
    /// Extra attempts after a transport error or timeout.
    pub backend_retries: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            format_retries: 2,
            backend_retries: 2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AgentSettings {
    pub variant: PromptVariant,
    pub templates: Templates,
    pub decoding: DecodingParams,
    pub retry: RetryPolicy,
}

fn complete_with_retry(
    backend: &dyn ModelBackend,
    prompt: &str,
    settings: &AgentSettings,
) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.complete(prompt, &settings.decoding) {
            Ok(text) => return Ok(text),
            Err(e @ (BackendError::Timeout | BackendError::Transport(_)))
                if attempt < settings.retry.backend_retries =>
            {
                log::warn!("backend {} failed ({e}), retrying", backend.label());
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Asks the backend to review `proposed` against the task and returns its
/// revised solution text.
pub fn self_correct(
    task_prompt: &str,
    proposed: &str,
    backend: &dyn ModelBackend,
    settings: &AgentSettings,
) -> Result<String, BackendError> {
    let prompt = render_template(
        &settings.templates.self_correction,
        &[("task", task_prompt), ("solution", proposed)],
    )
    .map_err(|e| BackendError::Config(e.to_string()))?;
    complete_with_retry(backend, &prompt, settings)
}

enum Reply {
    Pick(ParsedResponse, AgentTurn),
    Stop(AgentTurn),
}

fn turn(
    raw: String,
    revised: Option<String>,
    parsed: &ParsedResponse,
    attempts: usize,
) -> AgentTurn {
    AgentTurn {
        raw,
        revised,
        action: parsed.action_phrase.clone(),
        stop: parsed.stop,
        factor_claim: parsed.factor_claim,
        winning_combination: parsed.winning_combination.clone(),
        attempts,
    }
}

/// Runs one agent episode. Every environment step corresponds to exactly one
/// accepted reply; unusable replies are re-prompted up to the retry limit.
pub fn run_agent_episode(
    backend: &dyn ModelBackend,
    settings: &AgentSettings,
    config: &TaskConfig,
    seed: u64,
) -> Trajectory {
    let started = Instant::now();
    let config = config.with_seed(seed);
    let mut state = generate_task(&config).expect("sweep configs are validated up front");
    let mut hyps = HypothesisSet::full(Arc::new(HypothesisSpace::new(&config)));
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut traces: Vec<String> = Vec::new();
    let mut stop_response = None;
    let mut failure = None;
    let fail = |kind, message: String| Some(Failure { kind, message });

    let termination = 'episode: loop {
        if state.is_terminated() {
            break Termination::Budget;
        }
        if state.untried().is_empty() {
            break Termination::Exhausted;
        }
        let base_prompt =
            match render_prompt(&state, settings.variant, &settings.templates, &traces) {
                Ok(p) => p,
                Err(e) => {
                    failure = fail(FailureKind::InvalidActionAbort, e.to_string());
                    break Termination::Aborted;
                }
            };
        let mut prompt = base_prompt.clone();
        let mut attempts = 0;
        let reply = loop {
            attempts += 1;
            let raw = match complete_with_retry(backend, &prompt, settings) {
                Ok(r) => r,
                Err(e) => {
                    failure = fail(FailureKind::BackendFailure, e.to_string());
                    break 'episode Termination::Aborted;
                }
            };
            let mut revised = None;
            let mut parsed = parse_response(&raw, &config, state.universe());
            if settings.variant == PromptVariant::SelfCorrection {
                let text = match self_correct(&base_prompt, &raw, backend, settings) {
                    Ok(t) => t,
                    Err(e) => {
                        failure = fail(FailureKind::BackendFailure, e.to_string());
                        break 'episode Termination::Aborted;
                    }
                };
                let reparsed = parse_response(&text, &config, state.universe());
                // a bare "the proposal is valid" keeps the original proposal
                if !(matches!(reparsed, Err(ParseError::ParseFailure)) && parsed.is_ok()) {
                    parsed = reparsed;
                }
                revised = Some(text);
            }
            let problem = match parsed {
                Ok(p) if p.stop => {
                    let t = turn(raw, revised, &p, attempts);
                    break Reply::Stop(t);
                }
                Ok(p) => {
                    let id = p
                        .resolved_object
                        .expect("non-stop parses resolve an object");
                    if state.was_tried(id) {
                        format!(
                            "{} was already picked up",
                            state.universe()[id].description_with_article()
                        )
                    } else {
                        let t = turn(raw, revised, &p, attempts);
                        break Reply::Pick(p, t);
                    }
                }
                Err(e) => e.to_string(),
            };
            if attempts > settings.retry.format_retries {
                failure = fail(
                    FailureKind::InvalidActionAbort,
                    format!("no usable reply after {attempts} attempts: {problem}"),
                );
                break 'episode Termination::Aborted;
            }
            prompt = format!("{base_prompt}\n\n{FORMAT_REMINDER}");
        };
        match reply {
            Reply::Stop(t) => {
                if state.history().is_empty() || !hyps.is_sufficient() {
                    failure = fail(
                        FailureKind::PrematureStop,
                        format!(
                            "stopped after {} steps with {} rules alive",
                            steps.len(),
                            hyps.len()
                        ),
                    );
                }
                stop_response = Some(t);
                break Termination::Stopped;
            }
            Reply::Pick(p, t) => {
                let id = p.resolved_object.expect("picks resolve an object");
                let eig = hyps.expected_info_gain(&state.universe()[id]);
                let reward = state.step(id).expect("untried object in budget");
                let obs = *state.history().last().expect("just stepped");
                hyps = hyps
                    .observe(&obs)
                    .expect("environment rewards are consistent");
                traces.push(t.revised.clone().unwrap_or_else(|| t.raw.clone()));
                steps.push(StepRecord {
                    step_index: obs.step_index,
                    object_id: id,
                    object: state.universe()[id].description(),
                    reward,
                    alive: hyps.len(),
                    eig,
                    agent: Some(t),
                });
            }
        }
    };

    let sufficiency =
        steps_to_sufficiency(state.history(), &config).expect("environment rewards are consistent");
    let final_answer = stop_response
        .as_ref()
        .or_else(|| steps.last().and_then(|s| s.agent.as_ref()))
        .and_then(|t| t.winning_combination.clone());
    Trajectory {
        condition: String::new(),
        policy: String::new(),
        episode: 0,
        seed,
        config: config.clone(),
        hidden_rule: state.hidden_rule().clone(),
        steps,
        stop_response,
        final_answer,
        sufficiency,
        termination,
        failure,
        elapsed_ms: Some(started.elapsed().as_millis() as u64),
    }
}
