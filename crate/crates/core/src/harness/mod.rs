//! Experiment orchestration: sweep configs, parallel runs, replay checks and reports.

mod replay;
mod report;
mod run;
mod spec;

pub use replay::{replay_trajectory, replay_verify, LineError, Mismatch, ReplayReport};
pub use report::{
    load_run, report, AncovaComparison, AncovaRequest, Metric, Report, SUMMARY_CSV, SUMMARY_JSON,
};
pub use run::{run_sweep, ConditionOutcome, RunSummary, MANIFEST};
pub use spec::{ConditionSpec, PolicyKind, RetrySpec, SweepSpec};
