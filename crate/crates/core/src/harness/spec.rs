use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{
    AgentSettings, BackendSpec, DecodingParams, PromptVariant, RetryPolicy, Templates,
};
use crate::env::{TaskConfig, TaskConfigFile, VocabSpec};
use crate::error::HarnessError;
use crate::policy::Baseline;

/// What drives a condition: a reference policy or a model under a prompt variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Baseline(Baseline),
    Llm(PromptVariant),
}

impl FromStr for PolicyKind {
    type Err = String;

    /// `optimal`, `random_with`, `random_without`, or `llm:<variant>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(variant) = s.strip_prefix("llm:") {
            return variant.parse().map(PolicyKind::Llm);
        }
        if s == "llm" {
            return Ok(PolicyKind::Llm(PromptVariant::Base));
        }
        s.parse()
            .map(PolicyKind::Baseline)
            .map_err(|e| format!("{e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub name: String,
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<VocabSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapes: Option<VocabSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub textures: Option<VocabSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    pub episodes: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl ConditionSpec {
    pub fn task_config(&self) -> Result<TaskConfig, HarnessError> {
        let file = TaskConfigFile {
            preset: self.preset.clone(),
            rule_kind: self.rule_kind.clone(),
            colors: self.colors.clone(),
            shapes: self.shapes.clone(),
            textures: self.textures.clone(),
            budget: self.budget,
            seed: Some(self.base_seed),
        };
        file.resolve()
            .map_err(|e| HarnessError::InvalidConfig(format!("condition `{}`: {e}", self.name)))
    }

    pub fn policy_kind(&self) -> Result<PolicyKind, HarnessError> {
        self.policy
            .parse()
            .map_err(|e| HarnessError::InvalidConfig(format!("condition `{}`: {e}", self.name)))
    }

    /// Seed of episode `index`.
    pub fn seed(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySpec {
    pub format_retries: usize,
    pub backend_retries: usize,
}

impl Default for RetrySpec {
    fn default() -> Self {
        let r = RetryPolicy::default();
        RetrySpec {
            format_retries: r.format_retries,
            backend_retries: r.backend_retries,
        }
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(rename = "condition")]
    pub conditions: Vec<ConditionSpec>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Upper bound on concurrent model requests; defaults to `jobs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_in_flight: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendSpec>,
    #[serde(default)]
    pub decoding: DecodingParams,
    #[serde(default)]
    pub retry: RetrySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let spec: SweepSpec =
            toml::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Loads a config file; a relative `templates_dir` or scripted backend
    /// directory is taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut spec = SweepSpec::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(dir) = &spec.templates_dir {
            spec.templates_dir = Some(base.join(dir));
        }
        if let Some(BackendSpec::Scripted { dir }) = &spec.backend {
            spec.backend = Some(BackendSpec::Scripted {
                dir: base.join(dir),
            });
        }
        Ok(spec)
    }

    /// The three reference policies on a named preset.
    pub fn for_preset(name: &str, episodes: usize, base_seed: u64) -> Result<Self, HarnessError> {
        let conditions = Baseline::ALL
            .iter()
            .map(|b| ConditionSpec {
                name: format!("{name}-{}", b.as_str()),
                policy: b.as_str().to_string(),
                preset: Some(name.to_string()),
                rule_kind: None,
                colors: None,
                shapes: None,
                textures: None,
                budget: None,
                episodes,
                base_seed,
            })
            .collect();
        let spec = SweepSpec {
            conditions,
            jobs: default_jobs(),
            max_in_flight: None,
            out: None,
            backend: None,
            decoding: DecodingParams::default(),
            retry: RetrySpec::default(),
            templates_dir: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.conditions.is_empty() {
            return invalid("no conditions".into());
        }
        if self.jobs == 0 {
            return invalid("jobs must be at least 1".into());
        }
        if self.max_in_flight == Some(0) {
            return invalid("max_in_flight must be at least 1".into());
        }
        let mut names = BTreeSet::new();
        for c in &self.conditions {
            if c.name.is_empty()
                || !c
                    .name
                    .chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch))
                || c.name.starts_with('.')
            {
                return invalid(format!(
                    "condition name `{}` must be non-empty and use only [A-Za-z0-9._-]",
                    c.name
                ));
            }
            if !names.insert(c.name.as_str()) {
                return invalid(format!("duplicate condition `{}`", c.name));
            }
            if c.episodes == 0 {
                return invalid(format!("condition `{}` has 0 episodes", c.name));
            }
            c.task_config()?;
            if matches!(c.policy_kind()?, PolicyKind::Llm(_)) && self.backend.is_none() {
                return invalid(format!("condition `{}` needs a [backend] section", c.name));
            }
        }
        Ok(())
    }

    pub fn agent_settings(&self, variant: PromptVariant) -> Result<AgentSettings, HarnessError> {
        let templates = match &self.templates_dir {
            Some(dir) => Templates::load_dir(dir).map_err(|e| HarnessError::io(dir, e))?,
            None => Templates::builtin(),
        };
        Ok(AgentSettings {
            variant,
            templates,
            decoding: self.decoding,
            retry: RetryPolicy {
                format_retries: self.retry.format_retries,
                backend_retries: self.retry.backend_retries,
            },
        })
    }
}
