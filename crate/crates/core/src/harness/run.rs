use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{run_agent_episode, AgentSettings, BackendSpec, DecodingParams, ModelBackend};
use crate::env::TaskConfig;
use crate::error::{BackendError, HarnessError};
use crate::harness::report::{report, AncovaRequest};
use crate::harness::spec::{ConditionSpec, PolicyKind, SweepSpec};
use crate::policy::run_policy_episode;
use crate::trajectory::{FileHeader, Trajectory};

pub const MANIFEST: &str = "run_manifest.json";

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub name: String,
    pub policy: String,
    pub file: String,
    pub episodes: usize,
    pub aborted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ConditionOutcome {
    /// No episode produced a usable record.
    pub fn wholly_failed(&self) -> bool {
        self.error.is_some() || self.aborted == self.episodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub out: PathBuf,
    pub spec: SweepSpec,
    pub conditions: Vec<ConditionOutcome>,
    pub version: String,
    pub elapsed_ms: u64,
}

impl RunSummary {
    pub fn any_failed(&self) -> bool {
        self.conditions.iter().any(ConditionOutcome::wholly_failed)
    }
}

/// Counting semaphore bounding concurrent model requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate {
            free: Mutex::new(permits),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut free = self.free.lock().expect("lock poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("lock poisoned");
        }
        *free -= 1;
    }

    fn release(&self) {
        *self.free.lock().expect("lock poisoned") += 1;
        self.cv.notify_one();
    }
}

struct Throttled<'a> {
    inner: Box<dyn ModelBackend>,
    gate: &'a Gate,
}

impl ModelBackend for Throttled<'_> {
    fn label(&self) -> String {
        self.inner.label()
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        self.gate.acquire();
        let out = self.inner.complete(prompt, params);
        self.gate.release();
        out
    }
}

/// Stands in for a backend that could not be constructed, so the episode is
/// recorded as a backend failure.
struct Unavailable(BackendError);

impl ModelBackend for Unavailable {
    fn label(&self) -> String {
        "unavailable".into()
    }

    fn complete(&self, _: &str, _: &DecodingParams) -> Result<String, BackendError> {
        Err(self.0.clone())
    }
}

struct Prepared<'a> {
    spec: &'a ConditionSpec,
    config: TaskConfig,
    kind: PolicyKind,
    settings: Option<AgentSettings>,
}

fn run_episode(sweep: &SweepSpec, cond: &Prepared, gate: &Gate, index: usize) -> Trajectory {
    let seed = cond.spec.seed(index);
    let mut t = match cond.kind {
        PolicyKind::Baseline(mut b) => run_policy_episode(&mut b, &cond.config, seed),
        PolicyKind::Llm(_) => {
            let settings = cond
                .settings
                .as_ref()
                .expect("llm conditions carry settings");
            let backend_spec = sweep.backend.as_ref().expect("validated");
            let inner: Box<dyn ModelBackend> =
                match backend_spec.build(&cond.config.with_seed(seed), &cond.spec.name, index) {
                    Ok(b) => b,
                    Err(e) => Box::new(Unavailable(e)),
                };
            let backend = Throttled { inner, gate };
            run_agent_episode(&backend, settings, &cond.config, seed)
        }
    };
    t.condition = cond.spec.name.clone();
    t.policy = cond.spec.policy.clone();
    t.episode = index;
    t
}

fn write_condition(
    sweep: &SweepSpec,
    cond: &Prepared,
    gate: &Gate,
    pool: &rayon::ThreadPool,
    path: &Path,
) -> Result<usize, HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let header = FileHeader::new(
        &cond.spec.name,
        &cond.spec.policy,
        cond.spec.episodes,
        cond.spec.base_seed,
    );
    let io = |e| HarnessError::io(path, e);
    writeln!(writer, "{}", serde_json::to_string(&header)?).map_err(io)?;
    let mut aborted = 0;
    let mut start = 0;
    while start < cond.spec.episodes {
        let end = (start + CHUNK).min(cond.spec.episodes);
        let batch: Vec<Trajectory> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| run_episode(sweep, cond, gate, i))
                .collect()
        });
        for t in &batch {
            aborted += usize::from(t.is_aborted());
            writeln!(writer, "{}", serde_json::to_string(t)?).map_err(io)?;
        }
        start = end;
    }
    writer.flush().map_err(io)?;
    Ok(aborted)
}

fn check_credentials(spec: &SweepSpec) -> Result<(), HarnessError> {
    let needs_backend = spec
        .conditions
        .iter()
        .any(|c| matches!(c.policy_kind(), Ok(PolicyKind::Llm(_))));
    if let (
        true,
        Some(BackendSpec::Http {
            token_env: Some(var),
            ..
        }),
    ) = (needs_backend, &spec.backend)
    {
        if std::env::var_os(var).is_none() {
            return Err(HarnessError::InvalidConfig(format!(
                "environment variable {var} is not set"
            )));
        }
    }
    Ok(())
}

/// Runs every condition, writing `<condition>.jsonl` files, the manifest and
/// the summary tables into `out`.
pub fn run_sweep(spec: &SweepSpec, out: &Path) -> Result<RunSummary, HarnessError> {
    spec.validate()?;
    check_credentials(spec)?;
    let started = Instant::now();
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let gate = Gate::new(spec.max_in_flight.unwrap_or(spec.jobs));

    let mut outcomes = Vec::new();
    for c in &spec.conditions {
        let kind = c.policy_kind()?;
        let settings = match kind {
            PolicyKind::Llm(variant) => Some(spec.agent_settings(variant)?),
            PolicyKind::Baseline(_) => None,
        };
        let prepared = Prepared {
            spec: c,
            config: c.task_config()?,
            kind,
            settings,
        };
        let file = format!("{}.jsonl", c.name);
        let path = out.join(&file);
        let outcome = match write_condition(spec, &prepared, &gate, &pool, &path) {
            Ok(aborted) => {
                if aborted == c.episodes {
                    log::error!("condition {}: every episode aborted", c.name);
                }
                ConditionOutcome {
                    name: c.name.clone(),
                    policy: c.policy.clone(),
                    file,
                    episodes: c.episodes,
                    aborted,
                    error: None,
                }
            }
            Err(e @ HarnessError::Io { .. }) => return Err(e),
            Err(e) => {
                log::error!("condition {} failed: {e}", c.name);
                ConditionOutcome {
                    name: c.name.clone(),
                    policy: c.policy.clone(),
                    file,
                    episodes: c.episodes,
                    aborted: c.episodes,
                    error: Some(e.to_string()),
                }
            }
        };
        outcomes.push(outcome);
    }

    let summary = RunSummary {
        out: out.to_path_buf(),
        spec: spec.clone(),
        conditions: outcomes,
        version: env!("CARGO_PKG_VERSION").to_string(),
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    let manifest = out.join(MANIFEST);
    std::fs::write(&manifest, serde_json::to_string_pretty(&summary)?)
        .map_err(|e| HarnessError::io(&manifest, e))?;
    report(out, None::<&AncovaRequest>)?;
    Ok(summary)
}
