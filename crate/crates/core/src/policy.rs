//! Baseline exploration policies and the episode loop that drives them.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{generate_task, policy_rng, EpisodeState, Observation, TaskConfig};
use crate::error::PolicyError;
use crate::hypothesis::{steps_to_sufficiency, HypothesisSet, HypothesisSpace, Sufficiency};
use crate::trajectory::{Failure, FailureKind, StepRecord, Termination, Trajectory};

/// Gains closer than this are treated as ties.
pub const EIG_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolicyDecision {
    pub object_id: Option<usize>,
    pub rationale: Option<String>,
    pub stop: bool,
}

impl PolicyDecision {
    fn pick(object_id: usize) -> Self {
        PolicyDecision {
            object_id: Some(object_id),
            ..Default::default()
        }
    }
}

pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Whether the policy may pick an object it already tried.
    fn allows_repeats(&self) -> bool {
        false
    }

    fn decide(
        &mut self,
        state: &EpisodeState,
        hyps: &HypothesisSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<PolicyDecision, PolicyError>;
}

/// Untried objects with the highest expected information gain, and that gain.
pub fn best_untried(state: &EpisodeState, hyps: &HypothesisSet) -> (Vec<usize>, f64) {
    let scored: Vec<(usize, f64)> = state
        .untried()
        .into_iter()
        .map(|id| (id, hyps.expected_info_gain(&state.universe()[id])))
        .collect();
    let best = scored
        .iter()
        .map(|&(_, g)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    let ties = scored
        .into_iter()
        .filter(|&(_, g)| best - g <= EIG_TIE_TOLERANCE)
        .map(|(id, _)| id)
        .collect();
    (ties, best)
}

/// Greedy one-step information gain; ties broken uniformly through `rng`.
/// Stops once the set is sufficient and at least one object has been observed.
pub fn optimal_decide(
    state: &EpisodeState,
    hyps: &HypothesisSet,
    rng: &mut ChaCha8Rng,
) -> Result<PolicyDecision, PolicyError> {
    if hyps.is_sufficient() && !state.history().is_empty() {
        return Ok(PolicyDecision {
            stop: true,
            ..Default::default()
        });
    }
    let (ties, gain) = best_untried(state, hyps);
    let Some(&choice) = ties.choose(rng) else {
        return Err(PolicyError::ExhaustedUniverse);
    };
    Ok(PolicyDecision {
        object_id: Some(choice),
        rationale: Some(format!("expected information gain {gain:.6} bits")),
        stop: false,
    })
}

pub fn random_with_replacement_decide(
    state: &EpisodeState,
    rng: &mut ChaCha8Rng,
) -> Result<PolicyDecision, PolicyError> {
    let n = state.universe().len();
    if n == 0 {
        return Err(PolicyError::EmptyUniverse);
    }
    Ok(PolicyDecision::pick(rng.random_range(0..n)))
}

pub fn random_without_replacement_decide(
    state: &EpisodeState,
    rng: &mut ChaCha8Rng,
) -> Result<PolicyDecision, PolicyError> {
    state
        .untried()
        .choose(rng)
        .map(|&id| PolicyDecision::pick(id))
        .ok_or(PolicyError::ExhaustedUniverse)
}

/// The three reference policies, addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Optimal,
    RandomWith,
    RandomWithout,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [
        Baseline::Optimal,
        Baseline::RandomWithout,
        Baseline::RandomWith,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::Optimal => "optimal",
            Baseline::RandomWith => "random_with",
            Baseline::RandomWithout => "random_without",
        }
    }
}

impl FromStr for Baseline {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(Baseline::Optimal),
            "random_with" => Ok(Baseline::RandomWith),
            "random_without" => Ok(Baseline::RandomWithout),
            other => Err(PolicyError::UnknownPolicy(other.to_string())),
        }
    }
}

impl Policy for Baseline {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn allows_repeats(&self) -> bool {
        matches!(self, Baseline::RandomWith)
    }

    fn decide(
        &mut self,
        state: &EpisodeState,
        hyps: &HypothesisSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<PolicyDecision, PolicyError> {
        match self {
            Baseline::Optimal => optimal_decide(state, hyps, rng),
            Baseline::RandomWith => random_with_replacement_decide(state, rng),
            Baseline::RandomWithout => random_without_replacement_decide(state, rng),
        }
    }
}

/// Answer a perfect reasoner would give: the rule once only one labeling survives.
pub(crate) fn perfect_reasoner_answer(hyps: &HypothesisSet) -> Option<String> {
    if hyps.is_sufficient() {
        hyps.alive_rules().next().map(|r| r.target_string())
    } else {
        None
    }
}

/// Runs one seeded episode: generate, then decide and step until the policy
/// stops, the budget is spent, or no untried object remains.
pub fn run_policy_episode(policy: &mut dyn Policy, config: &TaskConfig, seed: u64) -> Trajectory {
    let started = Instant::now();
    let config = config.with_seed(seed);
    let mut state = generate_task(&config).expect("sweep configs are validated up front");
    let mut hyps = HypothesisSet::full(Arc::new(HypothesisSpace::new(&config)));
    let mut rng = policy_rng(seed);
    let mut steps = Vec::new();
    let mut failure = None;

    let termination = loop {
        if state.is_terminated() {
            break Termination::Budget;
        }
        if !policy.allows_repeats() && state.untried().is_empty() {
            break Termination::Exhausted;
        }
        let decision = match policy.decide(&state, &hyps, &mut rng) {
            Ok(d) => d,
            Err(e) => {
                failure = Some(Failure {
                    kind: FailureKind::PolicyError,
                    message: e.to_string(),
                });
                break Termination::Aborted;
            }
        };
        if decision.stop {
            break Termination::Stopped;
        }
        let id = decision
            .object_id
            .expect("non-stop decisions name an object");
        let eig = hyps.expected_info_gain(&state.universe()[id]);
        let stepped = if policy.allows_repeats() {
            state.step_with_replacement(id)
        } else {
            state.step(id)
        };
        let reward = match stepped {
            Ok(r) => r,
            Err(e) => {
                failure = Some(Failure {
                    kind: FailureKind::PolicyError,
                    message: e.to_string(),
                });
                break Termination::Aborted;
            }
        };
        let obs = Observation {
            object_id: id,
            reward,
            step_index: state.history().len(),
        };
        hyps = hyps
            .observe(&obs)
            .expect("observations from the hidden rule stay consistent");
        steps.push(StepRecord {
            step_index: obs.step_index,
            object_id: id,
            object: state.universe()[id].description(),
            reward,
            alive: hyps.len(),
            eig,
            agent: None,
        });
    };

    let sufficiency = steps_to_sufficiency(state.history(), &config).unwrap_or(Sufficiency {
        steps: config.budget,
        censored: true,
    });
    Trajectory {
        condition: String::new(),
        policy: policy.name().to_string(),
        episode: 0,
        seed,
        hidden_rule: state.hidden_rule().clone(),
        config,
        steps,
        stop_response: None,
        final_answer: perfect_reasoner_answer(&hyps),
        sufficiency,
        termination,
        failure,
        elapsed_ms: Some(started.elapsed().as_millis() as u64),
    }
}
