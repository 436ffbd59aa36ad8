//! Language-model agent: prompt rendering, response parsing, backends and the
//! episode loop.

mod backend;
mod episode;
mod parse;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use backend::{
    format_response, ApiFormat, BackendSpec, DecodingParams, HttpBackend, ModelBackend,
    OracleBackend, ScriptedBackend, SCRIPT_SEPARATOR,
};
pub use episode::{run_agent_episode, self_correct, AgentSettings, RetryPolicy, FORMAT_REMINDER};
pub use parse::{parse_response, resolve_object, ParsedResponse};
pub use template::{render_prompt, render_template, Templates, PLACEHOLDERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    #[default]
    Base,
    SelfCorrection,
    GuidedReasoning,
    LongContext,
}

impl PromptVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Base => "base",
            PromptVariant::SelfCorrection => "self_correction",
            PromptVariant::GuidedReasoning => "guided_reasoning",
            PromptVariant::LongContext => "long_context",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(PromptVariant::Base),
            "self_correction" | "self-correction" => Ok(PromptVariant::SelfCorrection),
            "guided_reasoning" | "guided" => Ok(PromptVariant::GuidedReasoning),
            "long_context" | "long-context" => Ok(PromptVariant::LongContext),
            other => Err(format!("unknown prompt variant `{other}`")),
        }
    }
}

/// Answer to "which factor(s) influence reward?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorClaim {
    Color,
    Shape,
    ColorShape,
    ColorTexture,
    ShapeTexture,
    Unsure,
}

impl FactorClaim {
    pub fn as_label(self) -> &'static str {
        match self {
            FactorClaim::Color => "COLOR",
            FactorClaim::Shape => "SHAPE",
            FactorClaim::ColorShape => "COLOR, SHAPE",
            FactorClaim::ColorTexture => "COLOR, TEXTURE",
            FactorClaim::ShapeTexture => "TEXTURE, SHAPE",
            FactorClaim::Unsure => "UNSURE",
        }
    }
}
