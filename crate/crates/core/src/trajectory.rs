//! Persisted episode record shared by baseline and agent runs.

use serde::{Deserialize, Serialize};

use crate::agent::FactorClaim;
use crate::env::{RewardRule, TaskConfig};
use crate::hypothesis::Sufficiency;

pub const SCHEMA_NAME: &str = "explore-trajectory";
pub const SCHEMA_VERSION: u32 = 1;

/// Fields extracted from the agent's text for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revised: Option<String>,
    pub action: Option<String>,
    pub stop: bool,
    pub factor_claim: FactorClaim,
    pub winning_combination: Option<String>,
    /// Completions consumed, including format re-prompts.
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub object_id: usize,
    pub object: String,
    pub reward: u8,
    /// Alive-set size after this observation.
    pub alive: usize,
    /// Expected information gain of the chosen object before it was observed.
    pub eig: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentTurn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stopped,
    Budget,
    Exhausted,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    PrematureStop,
    InvalidActionAbort,
    BackendFailure,
    PolicyError,
}

impl FailureKind {
    /// Aborted episodes are excluded from efficiency means.
    pub fn is_abort(self) -> bool {
        !matches!(self, FailureKind::PrematureStop)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub condition: String,
    pub policy: String,
    pub episode: usize,
    pub seed: u64,
    pub config: TaskConfig,
    pub hidden_rule: RewardRule,
    pub steps: Vec<StepRecord>,
    /// Raw text of the response that ended the episode with a stop, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_response: Option<AgentTurn>,
    pub final_answer: Option<String>,
    pub sufficiency: Sufficiency,
    pub termination: Termination,
    #[serde(default)]
    pub failure: Option<Failure>,
    /// Wall-clock duration; excluded from determinism checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl Trajectory {
    /// Winning-combination claims in step order, including a final stop response.
    pub fn claims(&self) -> Vec<&str> {
        self.steps
            .iter()
            .filter_map(|s| s.agent.as_ref())
            .chain(self.stop_response.as_ref())
            .filter_map(|a| a.winning_combination.as_deref())
            .collect()
    }

    pub fn is_aborted(&self) -> bool {
        self.failure.as_ref().is_some_and(|f| f.kind.is_abort())
    }
}

/// First line of every trajectory file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub schema: String,
    pub version: u32,
    pub condition: String,
    pub policy: String,
    pub episodes: usize,
    pub base_seed: u64,
}

impl FileHeader {
    pub fn new(condition: &str, policy: &str, episodes: usize, base_seed: u64) -> Self {
        FileHeader {
            schema: SCHEMA_NAME.to_string(),
            version: SCHEMA_VERSION,
            condition: condition.to_string(),
            policy: policy.to_string(),
            episodes,
            base_seed,
        }
    }
}
