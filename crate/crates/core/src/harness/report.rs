use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, StatsError};
use crate::harness::replay::{read_trajectories, trajectory_files, LineError};
use crate::metrics::{
    aggregate, ancova, mean_sem, score_trajectory, AncovaResult, GroupBy, GroupRow, MeanSem,
    ScoreRecord,
};
use crate::trajectory::Trajectory;

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Steps,
    Accuracy,
}

impl Metric {
    fn value(self, r: &ScoreRecord) -> f64 {
        match self {
            Metric::Steps => r.steps as f64,
            Metric::Accuracy => f64::from(r.accuracy),
        }
    }
}

/// Groups to compare with |colors| as covariate. The first group is the
/// reference for pairwise tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaRequest {
    pub by: GroupBy,
    pub groups: Vec<String>,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaComparison {
    pub reference: String,
    pub other: String,
    pub result: AncovaResult,
    /// Bonferroni-adjusted over the pairwise tests.
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaSection {
    pub request: AncovaRequest,
    pub omnibus: AncovaResult,
    pub pairwise: Vec<AncovaComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<GroupRow>,
    /// Per-condition mean score of the k-th claim.
    pub exploitation: BTreeMap<String, Vec<MeanSem>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancova: Option<AncovaSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<LineError>,
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    condition: &'a str,
    policy: &'a str,
    rule_kind: &'a str,
    n_colors: &'a str,
    n: usize,
    steps_mean: f64,
    steps_sem: f64,
    censored: usize,
    aborted: usize,
    premature_stops: usize,
    accuracy_mean: f64,
    accuracy_sem: f64,
}

/// All trajectories in a run directory, with any unreadable lines.
pub fn load_run(dir: impl AsRef<Path>) -> Result<(Vec<Trajectory>, Vec<LineError>), HarnessError> {
    let mut all = Vec::new();
    let mut errors = Vec::new();
    for path in trajectory_files(dir.as_ref())? {
        let (t, e) = read_trajectories(&path)?;
        all.extend(t);
        errors.extend(e);
    }
    Ok((all, errors))
}

fn group_key(by: GroupBy, r: &ScoreRecord) -> String {
    match by {
        GroupBy::Condition => r.condition.clone(),
        GroupBy::Policy => r.policy.clone(),
        GroupBy::RuleKind => r.rule_kind.as_str().to_string(),
        GroupBy::Colors => r.n_colors.to_string(),
    }
}

fn run_ancova(
    records: &[ScoreRecord],
    request: &AncovaRequest,
) -> Result<AncovaSection, HarnessError> {
    let mut present = Vec::new();
    for g in &request.groups {
        if records.iter().any(|r| &group_key(request.by, r) == g) {
            present.push(g.clone());
        } else {
            log::warn!("ANCOVA group `{g}` not found in run; skipped");
        }
    }
    if present.len() < 2 {
        return Err(StatsError::DesignError(format!(
            "ANCOVA needs at least 2 groups present, got {}",
            present.len()
        ))
        .into());
    }
    let fit = |groups: &[String]| -> Result<AncovaResult, StatsError> {
        let rows: Vec<&ScoreRecord> = records
            .iter()
            .filter(|r| !r.aborted && groups.contains(&group_key(request.by, r)))
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| request.metric.value(r)).collect();
        let x: Vec<f64> = rows.iter().map(|r| r.n_colors as f64).collect();
        let g: Vec<String> = rows.iter().map(|r| group_key(request.by, r)).collect();
        if x.windows(2).all(|w| w[0] == w[1]) {
            log::warn!(
                "every episode has the same color count; comparing groups without the covariate"
            );
        }
        ancova(&y, &x, &g)
    };
    let omnibus = fit(&present)?;
    let reference = &present[0];
    let m = (present.len() - 1) as f64;
    let mut pairwise = Vec::new();
    for other in &present[1..] {
        let result = fit(&[reference.clone(), other.clone()])?;
        pairwise.push(AncovaComparison {
            reference: reference.clone(),
            other: other.clone(),
            p_adjusted: (result.p * m).min(1.0),
            result,
        });
    }
    Ok(AncovaSection {
        request: request.clone(),
        omnibus,
        pairwise,
    })
}

/// Aggregates a run directory into `summary.csv` and `summary.json`.
pub fn report(
    dir: impl AsRef<Path>,
    request: Option<&AncovaRequest>,
) -> Result<Report, HarnessError> {
    let dir = dir.as_ref();
    let (trajectories, errors) = load_run(dir)?;
    for e in &errors {
        log::warn!("{}:{}: {}", e.file, e.line, e.message);
    }
    let records: Vec<ScoreRecord> = trajectories.iter().map(score_trajectory).collect();
    let rows = aggregate(
        &records,
        &[
            GroupBy::Condition,
            GroupBy::Policy,
            GroupBy::RuleKind,
            GroupBy::Colors,
        ],
    );

    let mut curves: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.aborted) {
        let cols = curves.entry(r.condition.clone()).or_default();
        for (k, &v) in r.exploitation.iter().enumerate() {
            if cols.len() <= k {
                cols.push(Vec::new());
            }
            cols[k].push(f64::from(v));
        }
    }
    let exploitation = curves
        .into_iter()
        .filter(|(_, cols)| !cols.is_empty())
        .map(|(c, cols)| (c, cols.iter().filter_map(|v| mean_sem(v)).collect()))
        .collect();

    let ancova = request.map(|req| run_ancova(&records, req)).transpose()?;
    let report = Report {
        rows,
        exploitation,
        ancova,
        errors,
    };

    let csv_path = dir.join(SUMMARY_CSV);
    let mut w = csv::Writer::from_path(&csv_path)?;
    for row in &report.rows {
        let key = |k: &str| row.key.get(k).map_or("", String::as_str);
        w.serialize(CsvRow {
            condition: key("condition"),
            policy: key("policy"),
            rule_kind: key("rule_kind"),
            n_colors: key("n_colors"),
            n: row.n,
            steps_mean: row.steps.mean,
            steps_sem: row.steps.sem,
            censored: row.censored,
            aborted: row.aborted,
            premature_stops: row.premature_stops,
            accuracy_mean: row.accuracy.mean,
            accuracy_sem: row.accuracy.sem,
        })?;
    }
    w.flush().map_err(|e| HarnessError::io(&csv_path, e))?;
    let json_path = dir.join(SUMMARY_JSON);
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)
        .map_err(|e| HarnessError::io(&json_path, e))?;
    Ok(report)
}
