use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::RuleKind;
use crate::metrics::score::{exploitation_curve, score_answer};
use crate::trajectory::{FailureKind, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub condition: String,
    pub policy: String,
    pub rule_kind: RuleKind,
    pub n_colors: usize,
    pub episode: usize,
    pub seed: u64,
    pub steps: usize,
    pub censored: bool,
    pub aborted: bool,
    pub premature_stop: bool,
    pub accuracy: u8,
    pub exploitation: Vec<u8>,
}

pub fn score_trajectory(t: &Trajectory) -> ScoreRecord {
    ScoreRecord {
        condition: t.condition.clone(),
        policy: t.policy.clone(),
        rule_kind: t.config.rule_kind,
        n_colors: t.config.colors.len(),
        episode: t.episode,
        seed: t.seed,
        steps: t.sufficiency.steps,
        censored: t.sufficiency.censored,
        aborted: t.is_aborted(),
        premature_stop: t
            .failure
            .as_ref()
            .is_some_and(|f| f.kind == FailureKind::PrematureStop),
        accuracy: score_answer(t.final_answer.as_deref().unwrap_or(""), &t.hidden_rule),
        exploitation: exploitation_curve(t, &t.hidden_rule),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSem {
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

/// Mean and standard error (sample standard deviation over sqrt n); SEM is 0 for n = 1.
pub fn mean_sem(values: &[f64]) -> Option<MeanSem> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sem = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSem { mean, sem, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Condition,
    Policy,
    RuleKind,
    Colors,
}

impl GroupBy {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::Condition => "condition",
            GroupBy::Policy => "policy",
            GroupBy::RuleKind => "rule_kind",
            GroupBy::Colors => "n_colors",
        }
    }

    fn key(self, r: &ScoreRecord) -> String {
        match self {
            GroupBy::Condition => r.condition.clone(),
            GroupBy::Policy => r.policy.clone(),
            GroupBy::RuleKind => r.rule_kind.as_str().to_string(),
            GroupBy::Colors => format!("{:03}", r.n_colors),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub key: BTreeMap<String, String>,
    /// Episodes entering the means (aborted episodes excluded).
    pub n: usize,
    pub steps: MeanSem,
    pub accuracy: MeanSem,
    pub censored: usize,
    pub aborted: usize,
    pub premature_stops: usize,
}

/// Per-group statistics. Censored episodes enter the means at their cap;
/// aborted episodes are counted but excluded. Groups with no usable episode
/// are dropped with a warning.
pub fn aggregate(records: &[ScoreRecord], group_by: &[GroupBy]) -> Vec<GroupRow> {
    let mut groups: BTreeMap<Vec<String>, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        let key = group_by.iter().map(|g| g.key(r)).collect();
        groups.entry(key).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (key, members) in groups {
        let kept: Vec<&&ScoreRecord> = members.iter().filter(|r| !r.aborted).collect();
        let steps: Vec<f64> = kept.iter().map(|r| r.steps as f64).collect();
        let accuracy: Vec<f64> = kept.iter().map(|r| f64::from(r.accuracy)).collect();
        let (Some(steps), Some(accuracy)) = (mean_sem(&steps), mean_sem(&accuracy)) else {
            log::warn!("group {key:?} has no usable episodes; omitted");
            continue;
        };
        let key = group_by
            .iter()
            .zip(key)
            .map(|(g, k)| {
                let k = match g {
                    GroupBy::Colors => k.trim_start_matches('0').to_string(),
                    _ => k,
                };
                (g.as_str().to_string(), k)
            })
            .collect();
        rows.push(GroupRow {
            key,
            n: kept.len(),
            steps,
            accuracy,
            censored: kept.iter().filter(|r| r.censored).count(),
            aborted: members.len() - kept.len(),
            premature_stops: members.iter().filter(|r| r.premature_stop).count(),
        });
    }
    rows
}
