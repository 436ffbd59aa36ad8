use std::path::Path;

use crate::agent::PromptVariant;
use crate::env::{EpisodeState, RuleKind};
use crate::error::TemplateError;

pub const PLACEHOLDERS: [&str; 4] = [
    "scene_description",
    "action_reward_description",
    "task",
    "solution",
];

const SINGLE_FEATURE: &str = include_str!("../../templates/single_feature.txt");
const CONJUNCTION: &str = include_str!("../../templates/conjunction.txt");
const SELF_CORRECTION: &str = include_str!("../../templates/self_correction.txt");
const GUIDED_REASONING: &str = include_str!("../../templates/guided_reasoning.txt");

// the exploration-cycle block that the guided strategy replaces
const AGENT_BLOCK_START: &str = "You are an AI agent designed for thoughtful exploration.";
const AGENT_BLOCK_END: &str = "test your hypothesis and gather more information.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub single_feature: String,
    pub conjunction: String,
    pub self_correction: String,
    pub guided_reasoning: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Templates {
            single_feature: SINGLE_FEATURE.to_string(),
            conjunction: CONJUNCTION.to_string(),
            self_correction: SELF_CORRECTION.to_string(),
            guided_reasoning: GUIDED_REASONING.to_string(),
        }
    }

    /// Reads `<name>.txt` files from `dir`, keeping the built-in text for any that are absent.
    pub fn load_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref();
        let mut t = Templates::builtin();
        for (name, slot) in [
            ("single_feature", &mut t.single_feature),
            ("conjunction", &mut t.conjunction),
            ("self_correction", &mut t.self_correction),
            ("guided_reasoning", &mut t.guided_reasoning),
        ] {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(t)
    }

    /// Template for the per-step task prompt.
    pub fn task_template(
        &self,
        kind: RuleKind,
        variant: PromptVariant,
    ) -> Result<String, TemplateError> {
        let base = match kind {
            RuleKind::SingleFeature => &self.single_feature,
            RuleKind::Conjunction => &self.conjunction,
        };
        if variant != PromptVariant::GuidedReasoning {
            return Ok(base.clone());
        }
        let start = base
            .find(AGENT_BLOCK_START)
            .ok_or_else(|| TemplateError::MissingSection(AGENT_BLOCK_START.into()))?;
        let end = base[start..]
            .find(AGENT_BLOCK_END)
            .map(|i| start + i + AGENT_BLOCK_END.len())
            .ok_or_else(|| TemplateError::MissingSection(AGENT_BLOCK_END.into()))?;
        Ok(format!(
            "{}{}{}",
            &base[..start],
            self.guided_reasoning.trim_end(),
            &base[end..]
        ))
    }
}

/// Substitutes `{name}` placeholders in one pass; substituted text is never rescanned.
/// Braces that do not enclose an identifier are copied through.
pub fn render_template(template: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let ident_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        if ident_len > 0 && after[ident_len..].starts_with('}') {
            let name = &after[..ident_len];
            if !PLACEHOLDERS.contains(&name) {
                return Err(TemplateError::UnknownPlaceholder(name.to_string()));
            }
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .unwrap_or("");
            out.push_str(value);
            rest = &after[ident_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders the task prompt for the current state. `traces` are the agent's
/// earlier responses and are only included for the long-context variant.
pub fn render_prompt(
    state: &EpisodeState,
    variant: PromptVariant,
    templates: &Templates,
    traces: &[String],
) -> Result<String, TemplateError> {
    let template = templates.task_template(state.config().rule_kind, variant)?;
    let scene = state.scene_description();
    let mut history = state.history_description();
    if variant == PromptVariant::LongContext && !traces.is_empty() {
        if !history.is_empty() {
            history.push_str("\n\n");
        }
        history.push_str("Your previous responses, in order:");
        for (i, trace) in traces.iter().enumerate() {
            history.push_str(&format!("\n\n[Response {}]\n{}", i + 1, trace.trim_end()));
        }
    }
    render_template(
        &template,
        &[
            ("scene_description", &scene),
            ("action_reward_description", &history),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_task, TaskConfig};

    fn two_by_two() -> EpisodeState {
        let config = TaskConfig::with_counts(RuleKind::SingleFeature, 2, 2, 0, 0).unwrap();
        generate_task(&config).unwrap()
    }

    #[test]
    fn builtin_templates_use_only_known_placeholders() {
        let t = Templates::builtin();
        for text in [
            &t.single_feature,
            &t.conjunction,
            &t.self_correction,
            &t.guided_reasoning,
        ] {
            render_template(text, &[]).unwrap();
        }
        assert!(t.single_feature.contains("{scene_description}"));
        assert!(t.single_feature.contains("{action_reward_description}"));
        assert!(t.self_correction.contains("TASK: {task}"));
        assert!(t.self_correction.contains("SOLUTION: {solution}"));
    }

    #[test]
    fn unknown_placeholder_is_an_error() {
        assert_eq!(
            render_template("hello {name}", &[]),
            Err(TemplateError::UnknownPlaceholder("name".into()))
        );
        // non-identifier braces pass through
        assert_eq!(render_template("{ } {a-b} {", &[]).unwrap(), "{ } {a-b} {");
    }

    #[test]
    fn substituted_text_is_not_rescanned() {
        let out = render_template(
            "{task}|{solution}",
            &[("task", "{solution}"), ("solution", "x")],
        )
        .unwrap();
        assert_eq!(out, "{solution}|x");
    }

    #[test]
    fn empty_history_renders_as_empty_block() {
        let state = two_by_two();
        let prompt =
            render_prompt(&state, PromptVariant::Base, &Templates::builtin(), &[]).unwrap();
        assert!(!prompt.contains('{'));
        assert!(prompt.contains(
            "test your hypothesis and gather more information.\n\n\n\n\nRespond with this format"
        ));
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut state = two_by_two();
        state.step(1).unwrap();
        let t = Templates::builtin();
        let a = render_prompt(&state, PromptVariant::Base, &t, &[]).unwrap();
        let b = render_prompt(&state, PromptVariant::Base, &t, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_context_contains_base_history() {
        let mut state = two_by_two();
        state.step(0).unwrap();
        state.step(3).unwrap();
        let t = Templates::builtin();
        let traces = vec![
            "first reasoning".to_string(),
            "second reasoning".to_string(),
        ];
        let base = render_prompt(&state, PromptVariant::Base, &t, &traces).unwrap();
        let long = render_prompt(&state, PromptVariant::LongContext, &t, &traces).unwrap();
        let history = state.history_description();
        assert!(base.contains(&history));
        assert!(!base.contains("first reasoning"));
        assert!(long.contains(&history));
        let first = long.find("first reasoning").unwrap();
        let second = long.find("second reasoning").unwrap();
        assert!(long.find(&history).unwrap() < first && first < second);
        assert!(long.len() > base.len());
    }

    #[test]
    fn guided_variant_swaps_the_agent_block() {
        let t = Templates::builtin();
        for kind in [RuleKind::SingleFeature, RuleKind::Conjunction] {
            let guided = t
                .task_template(kind, PromptVariant::GuidedReasoning)
                .unwrap();
            assert!(guided.contains("If no reward has been received: Systematically explore"));
            assert!(!guided.contains("Initially, this may involve random"));
            assert!(guided.contains("{scene_description}"));
            assert!(guided.contains("{action_reward_description}"));
            assert!(guided.contains("* Stop: <YES> or <NO>"));
        }
        let broken = Templates {
            single_feature: "no agent block here".into(),
            ..Templates::builtin()
        };
        assert!(matches!(
            broken.task_template(RuleKind::SingleFeature, PromptVariant::GuidedReasoning),
            Err(TemplateError::MissingSection(_))
        ));
    }

    #[test]
    fn load_dir_overrides_present_files_only() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("self_correction.txt"),
            "T={task} S={solution}",
        )
        .unwrap();
        let t = Templates::load_dir(dir.path()).unwrap();
        assert_eq!(t.self_correction, "T={task} S={solution}");
        assert_eq!(t.single_feature, Templates::builtin().single_feature);
    }
}
