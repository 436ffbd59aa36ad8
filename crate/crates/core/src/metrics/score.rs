use crate::env::RewardRule;
use crate::trajectory::Trajectory;

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// 1 iff every word of the rule's target string appears as a token of `answer`.
pub fn score_answer(answer: &str, rule: &RewardRule) -> u8 {
    let tokens: Vec<String> = words(answer).collect();
    let target = rule.target_string();
    let hit = words(&target).all(|w| tokens.contains(&w));
    u8::from(hit)
}

/// Score of every winning-combination claim, in response order.
pub fn exploitation_curve(trajectory: &Trajectory, rule: &RewardRule) -> Vec<u8> {
    trajectory
        .claims()
        .into_iter()
        .map(|c| score_answer(c, rule))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Factor, FactorValue};
    use proptest::prelude::*;

    fn blue_cylinder() -> RewardRule {
        RewardRule::conjunction(
            FactorValue::new(Factor::Color, "Blue"),
            FactorValue::new(Factor::Shape, "Cylinder"),
        )
    }

    #[test]
    fn examples() {
        let rule = blue_cylinder();
        assert_eq!(
            score_answer(
                "* **WINNING COMBINATION:** COLOR, SHAPE (Blue, Cylinder)",
                &rule
            ),
            1
        );
        assert_eq!(score_answer("red", &rule), 0);
        assert_eq!(score_answer("the blue CYLINDER wins", &rule), 1);
        assert_eq!(score_answer("blue", &rule), 0);
        assert_eq!(score_answer("bluecylinder", &rule), 0);
        assert_eq!(
            score_answer("", &RewardRule::single(Factor::Color, "red")),
            0
        );
    }

    proptest! {
        #[test]
        fn adding_tokens_never_loses_credit(a in "[a-zA-Z ,.()*:]{0,40}", b in "[a-zA-Z ,.()*:]{0,40}") {
            let rule = blue_cylinder();
            let before = score_answer(&a, &rule);
            let after = score_answer(&format!("{a} {b}"), &rule);
            prop_assert!(after >= before);
        }
    }
}
