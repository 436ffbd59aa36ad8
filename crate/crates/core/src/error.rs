use thiserror::Error;

use crate::env::Factor;

/// Failures raised by task construction and the episode state machine.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("invalid task configuration: {0}")]
    Config(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("object {0} does not exist")]
    NotFound(usize),
    #[error("object {0} has already been picked up")]
    RepeatAction(usize),
    #[error("episode already terminated")]
    Terminated,
    #[error("object {object} has no value for factor {factor}")]
    MissingFactor { object: usize, factor: Factor },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HypothesisError {
    #[error("observation of object {object} with reward {reward} leaves no consistent rule")]
    InconsistentHistory { object: usize, reward: u8 },
    #[error("hypothesis set is empty")]
    Empty,
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("no untried objects remain and the hypothesis set is not yet sufficient")]
    ExhaustedUniverse,
    #[error("universe is empty")]
    EmptyUniverse,
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown placeholder `{{{0}}}` in template")]
    UnknownPlaceholder(String),
    #[error("template is missing the section `{0}`")]
    MissingSection(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("response has no `Action:` line")]
    ParseFailure,
    #[error("action `{phrase}` matches more than one object")]
    AmbiguousAction { phrase: String },
    #[error("action `{phrase}` does not name an object in the scene")]
    UnknownObject { phrase: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend request timed out")]
    Timeout,
    #[error("backend transport error: {0}")]
    Transport(String),
    #[error("backend returned an unexpected payload: {0}")]
    Protocol(String),
    #[error("scripted backend ran out of responses after {0} calls")]
    Exhausted(usize),
    #[error("backend configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("design matrix is rank deficient: {0}")]
    DesignError(String),
    #[error("input lengths differ: {0}")]
    Shape(String),
}

/// Errors surfaced by the sweep runner, replay and reporting.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trajectory file {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
