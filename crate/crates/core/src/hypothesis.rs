//! Exact inference over the reward-rule space.
//!
//! Every rule for a task is enumerated up front together with the labeling it
//! induces over the universe. A [`HypothesisSet`] is the subset of rules still
//! consistent with the observations; filtering returns a new set. Under the
//! uniform prior, entropy is `log2 |alive|` and the expected information gain of
//! an object is the entropy drop averaged over its two possible rewards.
//!
//! Two rules whose labelings agree on every object cannot be told apart by any
//! experiment. Sufficiency is therefore declared when all alive rules fall in
//! one labeling class; on non-degenerate full-cross universes each class is a
//! single rule and this coincides with `|alive| == 1`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{
    build_universe, reward_of, Factor, FactorValue, Object, Observation, RewardRule, RuleKind,
    TaskConfig,
};
use crate::error::HypothesisError;

/// Reward labels of one rule over the universe, packed as bits by object id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling(Vec<u64>);

impl Labeling {
    fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut words = vec![0u64; len.div_ceil(64)];
        for i in 0..len {
            if f(i) {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Labeling(words)
    }

    pub fn get(&self, object_id: usize) -> u8 {
        ((self.0[object_id / 64] >> (object_id % 64)) & 1) as u8
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

/// All candidate rules for a config plus their labelings.
#[derive(Debug)]
pub struct HypothesisSpace {
    config: TaskConfig,
    universe: Vec<Object>,
    rules: Vec<RewardRule>,
    labelings: Vec<Labeling>,
}

impl HypothesisSpace {
    pub fn new(config: &TaskConfig) -> Self {
        let universe = build_universe(config);
        let rules = enumerate_rules(config);
        let labelings = rules
            .iter()
            .map(|r| {
                Labeling::from_fn(universe.len(), |i| {
                    reward_of(r, &universe[i]).expect("universe covers active factors") == 1
                })
            })
            .collect();
        HypothesisSpace {
            config: config.clone(),
            universe,
            rules,
            labelings,
        }
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn universe(&self) -> &[Object] {
        &self.universe
    }

    pub fn rules(&self) -> &[RewardRule] {
        &self.rules
    }

    pub fn labeling(&self, rule_index: usize) -> &Labeling {
        &self.labelings[rule_index]
    }
}

/// SingleFeature: colors then shapes. Conjunction: Color+Shape, Color+Texture,
/// Shape+Texture, each as a nested loop over the two vocabularies.
pub fn enumerate_rules(config: &TaskConfig) -> Vec<RewardRule> {
    match config.rule_kind {
        RuleKind::SingleFeature => [Factor::Color, Factor::Shape]
            .iter()
            .flat_map(|&f| {
                config
                    .vocab(f)
                    .iter()
                    .map(move |v| RewardRule::single(f, v.clone()))
            })
            .collect(),
        RuleKind::Conjunction => {
            let pairs = [
                (Factor::Color, Factor::Shape),
                (Factor::Color, Factor::Texture),
                (Factor::Shape, Factor::Texture),
            ];
            let mut rules = Vec::new();
            for (a, b) in pairs {
                for va in config.vocab(a) {
                    for vb in config.vocab(b) {
                        rules.push(RewardRule::conjunction(
                            FactorValue::new(a, va.clone()),
                            FactorValue::new(b, vb.clone()),
                        ));
                    }
                }
            }
            rules
        }
    }
}

fn log2_count(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        (n as f64).log2()
    }
}

/// Rules still consistent with the observations, under a uniform prior.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    space: Arc<HypothesisSpace>,
    alive: Vec<usize>,
}

impl PartialEq for HypothesisSet {
    fn eq(&self, other: &Self) -> bool {
        self.alive_rules().eq(other.alive_rules())
    }
}

impl HypothesisSet {
    pub fn enumerate(config: &TaskConfig) -> Self {
        HypothesisSet::full(Arc::new(HypothesisSpace::new(config)))
    }

    pub fn full(space: Arc<HypothesisSpace>) -> Self {
        let alive = (0..space.rules.len()).collect();
        HypothesisSet { space, alive }
    }

    pub fn space(&self) -> &Arc<HypothesisSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    pub fn alive_indices(&self) -> &[usize] {
        &self.alive
    }

    pub fn alive_rules(&self) -> impl Iterator<Item = &RewardRule> + '_ {
        self.alive.iter().map(|&i| &self.space.rules[i])
    }

    pub fn contains(&self, rule: &RewardRule) -> bool {
        self.alive_rules().any(|r| r == rule)
    }

    pub fn to_rules(&self) -> Vec<RewardRule> {
        self.alive_rules().cloned().collect()
    }

    /// Keeps exactly the rules that predict `obs.reward` for `obj`.
    pub fn filter_consistent(
        &self,
        obs: &Observation,
        obj: &Object,
    ) -> Result<HypothesisSet, HypothesisError> {
        debug_assert_eq!(obs.object_id, obj.id);
        let mut alive = Vec::with_capacity(self.alive.len());
        for &i in &self.alive {
            if reward_of(&self.space.rules[i], obj)? == obs.reward {
                alive.push(i);
            }
        }
        if alive.is_empty() {
            return Err(HypothesisError::InconsistentHistory {
                object: obj.id,
                reward: obs.reward,
            });
        }
        Ok(HypothesisSet {
            space: Arc::clone(&self.space),
            alive,
        })
    }

    /// [`filter_consistent`](Self::filter_consistent) against the space's own universe.
    pub fn observe(&self, obs: &Observation) -> Result<HypothesisSet, HypothesisError> {
        let obj = self
            .space
            .universe
            .get(obs.object_id)
            .ok_or(crate::error::EnvError::NotFound(obs.object_id))?;
        self.filter_consistent(obs, obj)
    }

    /// Posterior entropy in bits, `log2 |alive|`.
    pub fn entropy(&self) -> Result<f64, HypothesisError> {
        if self.alive.is_empty() {
            return Err(HypothesisError::Empty);
        }
        Ok(log2_count(self.alive.len()))
    }

    /// Entropy of the induced distribution over labeling classes.
    pub fn labeling_entropy(&self) -> Result<f64, HypothesisError> {
        if self.alive.is_empty() {
            return Err(HypothesisError::Empty);
        }
        let n = self.alive.len() as f64;
        Ok(self
            .class_sizes()
            .into_iter()
            .map(|k| {
                let p = k as f64 / n;
                -p * p.log2()
            })
            .sum())
    }

    /// Number of alive rules predicting reward 1 for `object_id`.
    pub fn positive_count(&self, object_id: usize) -> usize {
        self.alive
            .iter()
            .filter(|&&i| self.space.labelings[i].get(object_id) == 1)
            .count()
    }

    /// Expected entropy reduction from observing the reward of `obj`.
    pub fn expected_info_gain(&self, obj: &Object) -> f64 {
        let n = self.alive.len();
        if n == 0 {
            return 0.0;
        }
        let ones = match self.space.universe.get(obj.id) {
            Some(known) if known == obj => self.positive_count(obj.id),
            _ => self
                .alive_rules()
                .filter(|r| reward_of(r, obj).ok() == Some(1))
                .count(),
        };
        let zeros = n - ones;
        if ones == 0 || zeros == 0 {
            return 0.0;
        }
        let nf = n as f64;
        let expected_posterior =
            (ones as f64 / nf) * log2_count(ones) + (zeros as f64 / nf) * log2_count(zeros);
        log2_count(n) - expected_posterior
    }

    fn class_sizes(&self) -> Vec<usize> {
        let mut sizes: HashMap<&Labeling, usize> = HashMap::new();
        for &i in &self.alive {
            *sizes.entry(&self.space.labelings[i]).or_default() += 1;
        }
        sizes.into_values().collect()
    }

    /// Partition of the alive rules by identical labelings, in enumeration order.
    pub fn labeling_classes(&self) -> Vec<Vec<RewardRule>> {
        let mut order: Vec<&Labeling> = Vec::new();
        let mut classes: HashMap<&Labeling, Vec<RewardRule>> = HashMap::new();
        for &i in &self.alive {
            let lab = &self.space.labelings[i];
            classes
                .entry(lab)
                .or_insert_with(|| {
                    order.push(lab);
                    Vec::new()
                })
                .push(self.space.rules[i].clone());
        }
        order
            .into_iter()
            .map(|lab| classes.remove(lab).unwrap())
            .collect()
    }

    /// True when every alive rule labels the universe identically.
    pub fn is_sufficient(&self) -> bool {
        match self.alive.split_first() {
            None => false,
            Some((&first, rest)) => {
                let lab = &self.space.labelings[first];
                rest.iter().all(|&i| &self.space.labelings[i] == lab)
            }
        }
    }

    /// The labeling every alive rule agrees on, once sufficient.
    pub fn predicted_labeling(&self) -> Option<&Labeling> {
        if self.is_sufficient() {
            Some(&self.space.labelings[self.alive[0]])
        } else {
            None
        }
    }
}

impl Serialize for HypothesisSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.alive_rules())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sufficiency {
    pub steps: usize,
    pub censored: bool,
}

/// First step count `t >= 1` after which the set is sufficient; censored at the
/// budget when the observations never get there.
pub fn steps_to_sufficiency(
    observations: &[Observation],
    config: &TaskConfig,
) -> Result<Sufficiency, HypothesisError> {
    let mut set = HypothesisSet::enumerate(config);
    for (t, obs) in observations.iter().enumerate() {
        set = set.observe(obs)?;
        if set.is_sufficient() {
            return Ok(Sufficiency {
                steps: t + 1,
                censored: false,
            });
        }
    }
    Ok(Sufficiency {
        steps: config.budget,
        censored: true,
    })
}
