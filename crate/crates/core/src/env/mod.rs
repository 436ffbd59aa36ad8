//! Task generation and the pick-up episode state machine.

mod config;

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{
    default_labels, RuleKind, TaskConfig, TaskConfigFile, VocabSpec, CONSTRUCTION_LAB,
    DEFAULT_COLORS, DEFAULT_SHAPES, DEFAULT_TEXTURES,
};

use crate::error::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Color,
    Shape,
    Texture,
}

impl Factor {
    pub const ALL: [Factor; 3] = [Factor::Color, Factor::Shape, Factor::Texture];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::Color => "color",
            Factor::Shape => "shape",
            Factor::Texture => "texture",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Adjective used when a texture label appears in an object description.
pub fn texture_adjective(label: &str) -> String {
    match label {
        "wood" => "wooden".to_string(),
        "wool" => "woolen".to_string(),
        "gold" => "golden".to_string(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Object {
    pub id: usize,
    pub values: BTreeMap<Factor, String>,
}

impl Object {
    pub fn value(&self, factor: Factor) -> Option<&str> {
        self.values.get(&factor).map(String::as_str)
    }

    /// "red wooden cube": color, then texture adjective, then shape.
    pub fn description(&self) -> String {
        let mut words = Vec::with_capacity(3);
        if let Some(c) = self.value(Factor::Color) {
            words.push(c.to_string());
        }
        if let Some(t) = self.value(Factor::Texture) {
            words.push(texture_adjective(t));
        }
        if let Some(s) = self.value(Factor::Shape) {
            words.push(s.to_string());
        }
        words.join(" ")
    }

    pub fn description_with_article(&self) -> String {
        let d = self.description();
        let article = match d.chars().next() {
            Some(c) if "aeiouAEIOU".contains(c) => "an",
            _ => "a",
        };
        format!("{article} {d}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FactorValue {
    pub factor: Factor,
    pub value: String,
}

impl FactorValue {
    pub fn new(factor: Factor, value: impl Into<String>) -> Self {
        FactorValue {
            factor,
            value: value.into(),
        }
    }

    fn matches(&self, obj: &Object) -> Result<bool, EnvError> {
        obj.value(self.factor)
            .map(|v| v == self.value)
            .ok_or(EnvError::MissingFactor {
                object: obj.id,
                factor: self.factor,
            })
    }
}

/// The hidden ground truth. Conjunction parts are stored in factor order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardRule {
    SingleFeature(FactorValue),
    Conjunction {
        first: FactorValue,
        second: FactorValue,
    },
}

impl RewardRule {
    pub fn single(factor: Factor, value: impl Into<String>) -> Self {
        RewardRule::SingleFeature(FactorValue::new(factor, value))
    }

    /// Panics if both parts name the same factor.
    pub fn conjunction(a: FactorValue, b: FactorValue) -> Self {
        assert_ne!(a.factor, b.factor, "conjunction needs two distinct factors");
        let (first, second) = if a.factor < b.factor { (a, b) } else { (b, a) };
        RewardRule::Conjunction { first, second }
    }

    pub fn parts(&self) -> Vec<&FactorValue> {
        match self {
            RewardRule::SingleFeature(fv) => vec![fv],
            RewardRule::Conjunction { first, second } => vec![first, second],
        }
    }

    pub fn factors(&self) -> Vec<Factor> {
        self.parts().iter().map(|p| p.factor).collect()
    }

    /// Value labels joined by a space: "red", "blue cylinder".
    pub fn target_string(&self) -> String {
        self.parts()
            .iter()
            .map(|p| p.value.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for RewardRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .parts()
            .iter()
            .map(|p| format!("{}={}", p.factor, p.value))
            .collect();
        f.write_str(&parts.join(" & "))
    }
}

pub fn reward_of(rule: &RewardRule, obj: &Object) -> Result<u8, EnvError> {
    let hit = match rule {
        RewardRule::SingleFeature(fv) => fv.matches(obj)?,
        RewardRule::Conjunction { first, second } => {
            // evaluate both so a missing factor is always reported
            let a = first.matches(obj)?;
            let b = second.matches(obj)?;
            a && b
        }
    };
    Ok(u8::from(hit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub object_id: usize,
    pub reward: u8,
    pub step_index: usize,
}

/// Rng driving task generation for a seed.
pub fn task_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rng for a policy's tie-breaking, on a stream disjoint from [`task_rng`].
pub fn policy_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Full Cartesian product of the active vocabularies; ids follow generation order.
pub fn build_universe(config: &TaskConfig) -> Vec<Object> {
    let mut objects = vec![BTreeMap::new()];
    for &factor in config.active_factors() {
        let mut next = Vec::with_capacity(objects.len() * config.vocab(factor).len());
        for partial in &objects {
            for label in config.vocab(factor) {
                let mut values = partial.clone();
                values.insert(factor, label.clone());
                next.push(values);
            }
        }
        objects = next;
    }
    objects
        .into_iter()
        .enumerate()
        .map(|(id, values)| Object { id, values })
        .collect()
}

fn factor_pairs() -> [(Factor, Factor); 3] {
    [
        (Factor::Color, Factor::Shape),
        (Factor::Color, Factor::Texture),
        (Factor::Shape, Factor::Texture),
    ]
}

/// Factor (or factor pair) first, uniformly; then value(s) uniformly.
pub fn sample_rule(config: &TaskConfig, rng: &mut ChaCha8Rng) -> RewardRule {
    let pick = |factor: Factor, rng: &mut ChaCha8Rng| {
        let value = config
            .vocab(factor)
            .choose(rng)
            .expect("validated vocabulary is non-empty");
        FactorValue::new(factor, value.clone())
    };
    match config.rule_kind {
        RuleKind::SingleFeature => {
            let factor = *[Factor::Color, Factor::Shape].choose(rng).unwrap();
            RewardRule::SingleFeature(pick(factor, rng))
        }
        RuleKind::Conjunction => {
            let (a, b) = *factor_pairs().choose(rng).unwrap();
            let first = pick(a, rng);
            let second = pick(b, rng);
            RewardRule::conjunction(first, second)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeState {
    config: TaskConfig,
    universe: Vec<Object>,
    hidden_rule: RewardRule,
    history: Vec<Observation>,
    tried: Vec<bool>,
    terminated: bool,
}

pub fn generate_task(config: &TaskConfig) -> Result<EpisodeState, EnvError> {
    config.validate()?;
    let mut rng = task_rng(config.seed);
    let hidden_rule = sample_rule(config, &mut rng);
    EpisodeState::with_rule(config, hidden_rule)
}

impl EpisodeState {
    /// Episode over a fixed rule instead of a sampled one.
    pub fn with_rule(config: &TaskConfig, hidden_rule: RewardRule) -> Result<Self, EnvError> {
        config.validate()?;
        for part in hidden_rule.parts() {
            if !config.active_factors().contains(&part.factor)
                || !config.vocab(part.factor).contains(&part.value)
            {
                return Err(EnvError::Config(format!(
                    "rule value {}={} is not in the task vocabulary",
                    part.factor, part.value
                )));
            }
        }
        let kind_matches = matches!(
            (&hidden_rule, config.rule_kind),
            (RewardRule::SingleFeature(_), RuleKind::SingleFeature)
                | (RewardRule::Conjunction { .. }, RuleKind::Conjunction)
        );
        if !kind_matches {
            return Err(EnvError::Config(format!(
                "rule {hidden_rule} does not fit a {} task",
                config.rule_kind
            )));
        }
        let universe = build_universe(config);
        Ok(EpisodeState {
            config: config.clone(),
            tried: vec![false; universe.len()],
            universe,
            hidden_rule,
            history: Vec::new(),
            terminated: false,
        })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn universe(&self) -> &[Object] {
        &self.universe
    }

    pub fn object(&self, id: usize) -> Result<&Object, EnvError> {
        self.universe.get(id).ok_or(EnvError::NotFound(id))
    }

    pub fn hidden_rule(&self) -> &RewardRule {
        &self.hidden_rule
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn was_tried(&self, id: usize) -> bool {
        self.tried.get(id).copied().unwrap_or(false)
    }

    pub fn untried(&self) -> Vec<usize> {
        (0..self.universe.len())
            .filter(|&i| !self.tried[i])
            .collect()
    }

    /// Picks up an object. Repeats are rejected.
    pub fn step(&mut self, object_id: usize) -> Result<u8, EnvError> {
        self.step_inner(object_id, false)
    }

    /// Picks up an object, allowing one that was already tried.
    pub fn step_with_replacement(&mut self, object_id: usize) -> Result<u8, EnvError> {
        self.step_inner(object_id, true)
    }

    fn step_inner(&mut self, object_id: usize, allow_repeat: bool) -> Result<u8, EnvError> {
        if self.terminated {
            return Err(EnvError::Terminated);
        }
        let obj = self.object(object_id)?;
        if !allow_repeat && self.tried[object_id] {
            return Err(EnvError::RepeatAction(object_id));
        }
        let reward = reward_of(&self.hidden_rule, obj)?;
        self.tried[object_id] = true;
        self.history.push(Observation {
            object_id,
            reward,
            step_index: self.history.len() + 1,
        });
        if self.history.len() >= self.config.budget {
            self.terminated = true;
        }
        Ok(reward)
    }

    pub fn scene_description(&self) -> String {
        let mut out = String::from("The room contains the following objects:");
        for obj in &self.universe {
            out.push_str("\n- ");
            out.push_str(&obj.description_with_article());
        }
        out
    }

    pub fn history_description(&self) -> String {
        self.history
            .iter()
            .map(|o| {
                format!(
                    "Step {}: picked up {} and received reward {}",
                    o.step_index,
                    self.universe[o.object_id].description_with_article(),
                    o.reward
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}
