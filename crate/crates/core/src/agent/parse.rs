use crate::agent::FactorClaim;
use crate::env::{texture_adjective, Factor, Object, TaskConfig};
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub action_phrase: Option<String>,
    pub resolved_object: Option<usize>,
    pub stop: bool,
    pub factor_claim: FactorClaim,
    pub winning_combination: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Action,
    Stop,
    Factor,
    Winning,
}

/// Strips list bullets and markdown emphasis from a response line.
fn normalize_line(line: &str) -> String {
    let unstarred = line.replace("**", "").replace("__", "");
    unstarred
        .trim_start_matches(|c: char| c.is_whitespace() || "*-•>#".contains(c))
        .trim()
        .to_string()
}

fn label_of(line: &str) -> Option<(Label, String)> {
    let lower = line.to_lowercase();
    let after_colon = |prefix: &str| -> Option<String> {
        let rest = lower.strip_prefix(prefix)?.trim_start();
        rest.strip_prefix(':')?;
        let cut = line.len() - rest.len() + 1;
        Some(line[cut..].trim().to_string())
    };
    if let Some(v) = after_colon("action") {
        return Some((Label::Action, v));
    }
    if let Some(v) = after_colon("stop") {
        return Some((Label::Stop, v));
    }
    if let Some(v) = after_colon("winning combination") {
        return Some((Label::Winning, v));
    }
    if lower.starts_with("which factor") || lower.starts_with("which combination") {
        let cut = line
            .find('?')
            .or_else(|| line.find(':'))
            .map_or(line.len(), |i| i + 1);
        return Some((Label::Factor, line[cut..].trim().to_string()));
    }
    None
}

fn strip_angles(value: &str) -> String {
    value
        .replace(['<', '>'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_stop(value: &str) -> bool {
    let v = strip_angles(value).to_lowercase();
    v.split(|c: char| !c.is_alphanumeric())
        .find(|w| !w.is_empty())
        .is_some_and(|w| w == "yes")
}

fn parse_claim(value: &str) -> FactorClaim {
    let v = value.to_uppercase();
    if v.contains("UNSURE") {
        return FactorClaim::Unsure;
    }
    let color = v.contains("COLOR") || v.contains("COLOUR");
    let shape = v.contains("SHAPE");
    let texture = v.contains("TEXTURE");
    match (color, shape, texture) {
        (true, false, false) => FactorClaim::Color,
        (false, true, false) => FactorClaim::Shape,
        (true, true, false) => FactorClaim::ColorShape,
        (true, false, true) => FactorClaim::ColorTexture,
        (false, true, true) => FactorClaim::ShapeTexture,
        _ => FactorClaim::Unsure,
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn find_span(haystack: &[String], needle: &[String]) -> Option<(usize, usize)> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len())
        .find(|&i| haystack[i..i + needle.len()] == *needle)
        .map(|i| (i, i + needle.len()))
}

/// Maps a free-text object phrase onto the universe. Each active factor must
/// match exactly one vocabulary value; textures also match their adjective form.
pub fn resolve_object(
    phrase: &str,
    config: &TaskConfig,
    universe: &[Object],
) -> Result<usize, ParseError> {
    let words = tokens(phrase);
    let mut chosen: Vec<(Factor, &str)> = Vec::new();
    for &factor in config.active_factors() {
        let mut hits: Vec<(&str, (usize, usize))> = Vec::new();
        for label in config.vocab(factor) {
            let mut forms = vec![tokens(label)];
            if factor == Factor::Texture {
                forms.push(tokens(&texture_adjective(label)));
            }
            if let Some(span) = forms.iter().filter_map(|f| find_span(&words, f)).next() {
                hits.push((label.as_str(), span));
            }
        }
        // "light blue" wins over "blue" when both are labels
        let kept: Vec<&str> = hits
            .iter()
            .filter(|(_, (s, e))| {
                !hits
                    .iter()
                    .any(|(_, (s2, e2))| s2 <= s && e <= e2 && (e2 - s2) > (e - s))
            })
            .map(|(l, _)| *l)
            .collect();
        match kept.as_slice() {
            [] => {
                return Err(ParseError::UnknownObject {
                    phrase: phrase.to_string(),
                })
            }
            [one] => chosen.push((factor, one)),
            _ => {
                return Err(ParseError::AmbiguousAction {
                    phrase: phrase.to_string(),
                })
            }
        }
    }
    universe
        .iter()
        .find(|obj| chosen.iter().all(|(f, v)| obj.value(*f) == Some(v)))
        .map(|obj| obj.id)
        .ok_or_else(|| ParseError::UnknownObject {
            phrase: phrase.to_string(),
        })
}

/// Extracts the structured fields from a model response. Labels match
/// case-insensitively with bullets and bold markers ignored; the first
/// occurrence of each label wins, except that an action line whose phrase does
/// not resolve yields to a later one that does.
pub fn parse_response(
    text: &str,
    config: &TaskConfig,
    universe: &[Object],
) -> Result<ParsedResponse, ParseError> {
    let mut actions: Vec<String> = Vec::new();
    let mut stop = None;
    let mut claim = None;
    let mut winning = None;
    for line in text.lines() {
        let Some((label, value)) = label_of(&normalize_line(line)) else {
            continue;
        };
        match label {
            Label::Action => actions.push(value),
            Label::Stop if stop.is_none() => stop = Some(parse_stop(&value)),
            Label::Factor if claim.is_none() => claim = Some(parse_claim(&value)),
            Label::Winning if winning.is_none() => winning = Some(strip_angles(&value)),
            _ => {}
        }
    }
    let stop = stop.unwrap_or(false);
    let factor_claim = claim.unwrap_or(FactorClaim::Unsure);
    let winning_combination = winning.filter(|w| !w.is_empty());

    let mut first_error = None;
    let mut resolved = None;
    for phrase in &actions {
        match resolve_object(phrase, config, universe) {
            Ok(id) => {
                resolved = Some((phrase.clone(), id));
                break;
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match (resolved, stop) {
        (Some((phrase, id)), _) => Ok(ParsedResponse {
            action_phrase: Some(phrase),
            resolved_object: Some(id),
            stop,
            factor_claim,
            winning_combination,
        }),
        (None, true) => Ok(ParsedResponse {
            action_phrase: actions.into_iter().next(),
            resolved_object: None,
            stop,
            factor_claim,
            winning_combination,
        }),
        (None, false) => Err(first_error.unwrap_or(ParseError::ParseFailure)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_universe, RuleKind};
    use proptest::prelude::*;

    fn conj() -> (TaskConfig, Vec<Object>) {
        let config = TaskConfig::with_counts(RuleKind::Conjunction, 3, 3, 3, 0).unwrap();
        let universe = build_universe(&config);
        (config, universe)
    }

    fn single(c: usize, s: usize) -> (TaskConfig, Vec<Object>) {
        let config = TaskConfig::with_counts(RuleKind::SingleFeature, c, s, 0, 0).unwrap();
        let universe = build_universe(&config);
        (config, universe)
    }

    fn id_of(universe: &[Object], desc: &str) -> usize {
        universe
            .iter()
            .find(|o| o.description() == desc)
            .unwrap()
            .id
    }

    #[test]
    fn bold_labels_and_adjectives() {
        let (config, universe) = conj();
        let text = "Let me think.\n\n* **Action:** pick up red wooden cube\n* **Stop:** NO\n*\n\
                    * **Which combination of factors influence reward?** COLOR, TEXTURE\n\
                    * **WINNING COMBINATION:** red wood\n";
        let p = parse_response(text, &config, &universe).unwrap();
        assert_eq!(p.resolved_object, Some(id_of(&universe, "red wooden cube")));
        assert!(!p.stop);
        assert_eq!(p.factor_claim, FactorClaim::ColorTexture);
        assert_eq!(p.winning_combination.as_deref(), Some("red wood"));
    }

    #[test]
    fn angle_brackets_and_case() {
        let (config, universe) = single(3, 3);
        let text =
            "ACTION: Pick up <Blue> <Plank>.\nstop: <NO>\nWhich factor influence reward? <SHAPE>";
        let p = parse_response(text, &config, &universe).unwrap();
        assert_eq!(p.resolved_object, Some(id_of(&universe, "blue plank")));
        assert_eq!(p.factor_claim, FactorClaim::Shape);
        assert_eq!(p.winning_combination, None);
    }

    #[test]
    fn first_occurrence_wins() {
        let (config, universe) = single(3, 3);
        let text =
            "* Action: pick up red cube\n* Stop: NO\n* Action: pick up green plank\n* Stop: YES";
        let p = parse_response(text, &config, &universe).unwrap();
        assert_eq!(p.resolved_object, Some(id_of(&universe, "red cube")));
        assert!(!p.stop);
    }

    #[test]
    fn echoed_format_line_yields_to_real_action() {
        let (config, universe) = single(3, 3);
        let text = "* Action: pick up <colored> <object>\n...\n* Action: pick up green cylinder\n* Stop: NO";
        let p = parse_response(text, &config, &universe).unwrap();
        assert_eq!(p.resolved_object, Some(id_of(&universe, "green cylinder")));
    }

    #[test]
    fn missing_action_is_parse_failure() {
        let (config, universe) = single(3, 3);
        assert_eq!(
            parse_response("I am not sure what to do.", &config, &universe),
            Err(ParseError::ParseFailure)
        );
    }

    #[test]
    fn stop_without_action_is_accepted() {
        let (config, universe) = single(3, 3);
        let p = parse_response(
            "* Action: none\n* Stop: YES\n* Which factor influence reward? COLOR\n* WINNING COMBINATION: red",
            &config,
            &universe,
        )
        .unwrap();
        assert!(p.stop);
        assert_eq!(p.resolved_object, None);
        assert_eq!(p.factor_claim, FactorClaim::Color);
    }

    #[test]
    fn ambiguous_and_unknown_phrases() {
        let (config, universe) = single(3, 3);
        assert!(matches!(
            parse_response("Action: pick up red or blue cube", &config, &universe),
            Err(ParseError::AmbiguousAction { .. })
        ));
        assert!(matches!(
            parse_response("Action: pick up purple cube", &config, &universe),
            Err(ParseError::UnknownObject { .. })
        ));
        assert!(matches!(
            parse_response("Action: pick up the red one", &config, &universe),
            Err(ParseError::UnknownObject { .. })
        ));
    }

    #[test]
    fn longer_label_shadows_contained_one() {
        let config = TaskConfig::new(
            RuleKind::SingleFeature,
            vec!["blue".into(), "light blue".into()],
            vec!["cube".into()],
            vec![],
            0,
        )
        .unwrap();
        let universe = build_universe(&config);
        assert_eq!(
            resolve_object("a light blue cube", &config, &universe),
            Ok(1)
        );
        assert_eq!(resolve_object("a blue cube", &config, &universe), Ok(0));
    }

    #[test]
    fn claim_variants() {
        assert_eq!(parse_claim("<TEXTURE, SHAPE>"), FactorClaim::ShapeTexture);
        assert_eq!(parse_claim("COLOR, SHAPE"), FactorClaim::ColorShape);
        assert_eq!(parse_claim("<UNSURE>"), FactorClaim::Unsure);
        assert_eq!(parse_claim("nothing"), FactorClaim::Unsure);
        assert_eq!(parse_claim("TEXTURE"), FactorClaim::Unsure);
    }

    proptest! {
        #[test]
        fn description_round_trips(c in 1usize..=8, s in 1usize..=6, t in 0usize..=4, pick in 0usize..1000) {
            let kind = if t == 0 { RuleKind::SingleFeature } else { RuleKind::Conjunction };
            let config = TaskConfig::with_counts(kind, c, s, t, 0).unwrap();
            let universe = build_universe(&config);
            let obj = &universe[pick % universe.len()];
            let text = format!("* Action: pick up {}\n* Stop: NO", obj.description_with_article());
            let p = parse_response(&text, &config, &universe).unwrap();
            prop_assert_eq!(p.resolved_object, Some(obj.id));
        }
    }
}
