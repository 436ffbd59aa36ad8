use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{generate_task, reward_of, Observation};
use crate::error::HarnessError;
use crate::harness::run::{RunSummary, MANIFEST};
use crate::hypothesis::{steps_to_sufficiency, HypothesisSet, HypothesisSpace};
use crate::policy::EIG_TIE_TOLERANCE;
use crate::trajectory::{FileHeader, Trajectory, SCHEMA_NAME, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub file: String,
    pub condition: String,
    pub episode: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub field: String,
    pub recorded: String,
    pub replayed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub files: usize,
    pub trajectories: usize,
    pub steps: usize,
    pub mismatches: Vec<Mismatch>,
    pub errors: Vec<LineError>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty() && self.errors.is_empty()
    }
}

/// Re-simulates one trajectory from its config and recorded actions. Later
/// checks use the replayed rewards, so one corrupted field yields one mismatch.
pub fn replay_trajectory(t: &Trajectory) -> Vec<Mismatch> {
    let mut out = Vec::new();
    let mut flag = |step: Option<usize>, field: &str, recorded: String, replayed: String| {
        out.push(Mismatch {
            file: String::new(),
            condition: t.condition.clone(),
            episode: t.episode,
            step,
            field: field.to_string(),
            recorded,
            replayed,
        });
    };
    let state = match generate_task(&t.config) {
        Ok(s) => s,
        Err(e) => {
            flag(None, "config", format!("{:?}", t.config), e.to_string());
            return out;
        }
    };
    if state.hidden_rule() != &t.hidden_rule {
        flag(
            None,
            "hidden_rule",
            t.hidden_rule.to_string(),
            state.hidden_rule().to_string(),
        );
        return out;
    }
    let rule = state.hidden_rule();
    let mut hyps = HypothesisSet::full(Arc::new(HypothesisSpace::new(&t.config)));
    let mut observations = Vec::new();
    for (i, s) in t.steps.iter().enumerate() {
        let step = Some(i + 1);
        if s.step_index != i + 1 {
            flag(
                step,
                "step_index",
                s.step_index.to_string(),
                (i + 1).to_string(),
            );
        }
        let Some(obj) = state.universe().get(s.object_id) else {
            flag(
                step,
                "object_id",
                s.object_id.to_string(),
                "out of range".into(),
            );
            break;
        };
        if obj.description() != s.object {
            flag(step, "object", s.object.clone(), obj.description());
        }
        let eig = hyps.expected_info_gain(obj);
        if (eig - s.eig).abs() > EIG_TIE_TOLERANCE {
            flag(step, "eig", s.eig.to_string(), eig.to_string());
        }
        let reward = reward_of(rule, obj).expect("universe objects cover the rule's factors");
        if reward != s.reward {
            flag(step, "reward", s.reward.to_string(), reward.to_string());
        }
        let obs = Observation {
            object_id: s.object_id,
            reward,
            step_index: i + 1,
        };
        hyps = hyps
            .observe(&obs)
            .expect("the hidden rule stays consistent");
        if hyps.len() != s.alive {
            flag(step, "alive", s.alive.to_string(), hyps.len().to_string());
        }
        observations.push(obs);
    }
    match steps_to_sufficiency(&observations, &t.config) {
        Ok(suff) if suff != t.sufficiency => flag(
            None,
            "sufficiency",
            format!("{:?}", t.sufficiency),
            format!("{suff:?}"),
        ),
        Ok(_) => {}
        Err(e) => flag(
            None,
            "sufficiency",
            format!("{:?}", t.sufficiency),
            e.to_string(),
        ),
    }
    out
}

/// The condition files listed in the run manifest, or every `*.jsonl` file when
/// the directory has no manifest.
pub(crate) fn trajectory_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let manifest = dir.join(MANIFEST);
    if manifest.exists() {
        let text =
            std::fs::read_to_string(&manifest).map_err(|e| HarnessError::io(&manifest, e))?;
        let summary: RunSummary = serde_json::from_str(&text)?;
        let mut files: Vec<PathBuf> = summary
            .conditions
            .iter()
            .map(|c| dir.join(&c.file))
            .filter(|p| p.exists())
            .collect();
        files.sort();
        return Ok(files);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads one trajectory file, returning parsed records and per-line errors.
pub(crate) fn read_trajectories(
    path: &Path,
) -> Result<(Vec<Trajectory>, Vec<LineError>), HarnessError> {
    let name = path
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut trajectories = Vec::new();
    let mut errors = Vec::new();
    let err = |line, message: String| LineError {
        file: name.clone(),
        line,
        message,
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if i == 0 {
            match serde_json::from_str::<FileHeader>(&line) {
                Ok(h) if h.schema == SCHEMA_NAME && h.version == SCHEMA_VERSION => continue,
                Ok(h) => {
                    errors.push(err(
                        1,
                        format!("unsupported schema {} v{}", h.schema, h.version),
                    ));
                    return Ok((trajectories, errors));
                }
                Err(e) => {
                    errors.push(err(1, format!("missing header: {e}")));
                    return Ok((trajectories, errors));
                }
            }
        }
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Trajectory>(&line) {
            Ok(t) => trajectories.push(t),
            Err(e) => errors.push(err(i + 1, e.to_string())),
        }
    }
    Ok((trajectories, errors))
}

/// Replays every `*.jsonl` file in `dir`.
pub fn replay_verify(dir: impl AsRef<Path>) -> Result<ReplayReport, HarnessError> {
    let dir = dir.as_ref();
    let mut report = ReplayReport::default();
    for path in trajectory_files(dir)? {
        let name = path
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let (trajectories, errors) = read_trajectories(&path)?;
        report.files += 1;
        report.errors.extend(errors);
        for t in &trajectories {
            report.trajectories += 1;
            report.steps += t.steps.len();
            report
                .mismatches
                .extend(replay_trajectory(t).into_iter().map(|mut m| {
                    m.file = name.clone();
                    m
                }));
        }
    }
    Ok(report)
}
