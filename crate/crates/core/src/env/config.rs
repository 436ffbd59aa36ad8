//! Task configuration: vocabularies, rule kind, budget and seed.
//!
//! A configuration file is a flat list of keys:
//!
//! ```toml
//! preset = "construction-lab"   # optional base, other keys override it
//! rule_kind = "conjunction"     # "single_feature" | "conjunction"
//! colors = 4                    # a count (first N default labels) or a list
//! shapes = ["cube", "disk"]
//! textures = 2
//! budget = 10                   # optional, defaults to the universe size
//! seed = 7
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::Factor;
use crate::error::EnvError;

pub const DEFAULT_COLORS: [&str; 12] = [
    "red", "green", "blue", "yellow", "purple", "orange", "pink", "brown", "white", "black",
    "gray", "cyan",
];
pub const DEFAULT_SHAPES: [&str; 8] = [
    "cylinder", "cube", "plank", "pyramid", "disk", "sphere", "cone", "ring",
];
pub const DEFAULT_TEXTURES: [&str; 5] = ["wood", "plastic", "steel", "glass", "rubber"];

/// Name of the preset mirroring the embodied task: 3 colors x 3 shapes, single feature.
pub const CONSTRUCTION_LAB: &str = "construction-lab";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    #[serde(alias = "single", alias = "single-feature")]
    SingleFeature,
    Conjunction,
}

impl RuleKind {
    pub fn active_factors(self) -> &'static [Factor] {
        match self {
            RuleKind::SingleFeature => &[Factor::Color, Factor::Shape],
            RuleKind::Conjunction => &[Factor::Color, Factor::Shape, Factor::Texture],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::SingleFeature => "single_feature",
            RuleKind::Conjunction => "conjunction",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RuleKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "single" | "single_feature" => Ok(RuleKind::SingleFeature),
            "conjunction" => Ok(RuleKind::Conjunction),
            other => Err(EnvError::Config(format!("unknown rule_kind `{other}`"))),
        }
    }
}

/// One experimental condition. Textures are ignored by single-feature tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub rule_kind: RuleKind,
    pub colors: Vec<String>,
    pub shapes: Vec<String>,
    #[serde(default)]
    pub textures: Vec<String>,
    pub budget: usize,
    pub seed: u64,
}

impl TaskConfig {
    /// Builds a config from vocabularies, defaulting the budget to the universe size.
    pub fn new(
        rule_kind: RuleKind,
        colors: Vec<String>,
        shapes: Vec<String>,
        textures: Vec<String>,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let mut config = TaskConfig {
            rule_kind,
            colors,
            shapes,
            textures,
            budget: 0,
            seed,
        };
        if rule_kind == RuleKind::SingleFeature {
            config.textures.clear();
        }
        config.budget = config.universe_size();
        config.validate()?;
        Ok(config)
    }

    /// Config using the first `n` default labels of each active factor.
    pub fn with_counts(
        rule_kind: RuleKind,
        colors: usize,
        shapes: usize,
        textures: usize,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let textures = match rule_kind {
            RuleKind::SingleFeature => Vec::new(),
            RuleKind::Conjunction => default_labels(Factor::Texture, textures)?,
        };
        TaskConfig::new(
            rule_kind,
            default_labels(Factor::Color, colors)?,
            default_labels(Factor::Shape, shapes)?,
            textures,
            seed,
        )
    }

    pub fn preset(name: &str) -> Result<Self, EnvError> {
        match name {
            // TODO: add a variant that re-samples 3 of 6 colors and 3 of 5 shapes per episode
            CONSTRUCTION_LAB => TaskConfig::with_counts(RuleKind::SingleFeature, 3, 3, 0, 0),
            other => Err(EnvError::UnknownPreset(other.to_string())),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TaskConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn with_budget(&self, budget: usize) -> Result<Self, EnvError> {
        let config = TaskConfig {
            budget,
            ..self.clone()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn vocab(&self, factor: Factor) -> &[String] {
        match factor {
            Factor::Color => &self.colors,
            Factor::Shape => &self.shapes,
            Factor::Texture => &self.textures,
        }
    }

    pub fn active_factors(&self) -> &'static [Factor] {
        self.rule_kind.active_factors()
    }

    pub fn universe_size(&self) -> usize {
        self.active_factors()
            .iter()
            .map(|f| self.vocab(*f).len())
            .product()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        for &factor in self.active_factors() {
            let vocab = self.vocab(factor);
            if vocab.is_empty() {
                return Err(EnvError::Config(format!("{factor} vocabulary is empty")));
            }
            let mut seen = HashSet::new();
            for label in vocab {
                let norm = label.trim().to_lowercase();
                if norm.is_empty() {
                    return Err(EnvError::Config(format!("{factor} has an empty label")));
                }
                if !seen.insert(norm) {
                    return Err(EnvError::Config(format!(
                        "{factor} label `{label}` appears twice"
                    )));
                }
            }
        }
        if self.budget == 0 {
            return Err(EnvError::Config("budget must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EnvError> {
        let file: TaskConfigFile =
            toml::from_str(text).map_err(|e| EnvError::Config(e.message().to_string()))?;
        file.resolve()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnvError::Config(format!("{}: {e}", path.display())))?;
        TaskConfig::from_toml_str(&text)
    }
}

pub fn default_labels(factor: Factor, n: usize) -> Result<Vec<String>, EnvError> {
    let pool: &[&str] = match factor {
        Factor::Color => &DEFAULT_COLORS,
        Factor::Shape => &DEFAULT_SHAPES,
        Factor::Texture => &DEFAULT_TEXTURES,
    };
    if n > pool.len() {
        return Err(EnvError::Config(format!(
            "at most {} default {factor} labels are available, {n} requested",
            pool.len()
        )));
    }
    Ok(pool[..n].iter().map(|s| s.to_string()).collect())
}

/// A vocabulary given either as a count of default labels or explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VocabSpec {
    Count(usize),
    Labels(Vec<String>),
}

impl VocabSpec {
    pub fn resolve(&self, factor: Factor) -> Result<Vec<String>, EnvError> {
        match self {
            VocabSpec::Count(n) => default_labels(factor, *n),
            VocabSpec::Labels(labels) => Ok(labels.clone()),
        }
    }
}

/// Flat on-disk form of [`TaskConfig`]; every key is optional when a preset is named.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfigFile {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub rule_kind: Option<String>,
    #[serde(default)]
    pub colors: Option<VocabSpec>,
    #[serde(default)]
    pub shapes: Option<VocabSpec>,
    #[serde(default)]
    pub textures: Option<VocabSpec>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl TaskConfigFile {
    pub fn resolve(&self) -> Result<TaskConfig, EnvError> {
        let base = match &self.preset {
            Some(name) => Some(TaskConfig::preset(name)?),
            None => None,
        };
        let rule_kind = match (&self.rule_kind, &base) {
            (Some(kind), _) => kind.parse()?,
            (None, Some(b)) => b.rule_kind,
            (None, None) => return Err(EnvError::Config("missing key `rule_kind`".into())),
        };
        let pick = |spec: &Option<VocabSpec>, factor: Factor| -> Result<Vec<String>, EnvError> {
            match (spec, &base) {
                (Some(s), _) => s.resolve(factor),
                (None, Some(b)) if !b.vocab(factor).is_empty() => Ok(b.vocab(factor).to_vec()),
                (None, _) if factor == Factor::Texture && rule_kind == RuleKind::SingleFeature => {
                    Ok(Vec::new())
                }
                (None, _) => Err(EnvError::Config(format!("missing key `{factor}s`"))),
            }
        };
        let colors = pick(&self.colors, Factor::Color)?;
        let shapes = pick(&self.shapes, Factor::Shape)?;
        let textures = pick(&self.textures, Factor::Texture)?;
        let seed = self.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0);
        let config = TaskConfig::new(rule_kind, colors, shapes, textures, seed)?;
        match self.budget {
            Some(budget) => config.with_budget(budget),
            None => Ok(config),
        }
    }
}
