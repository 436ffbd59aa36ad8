//! Scoring, aggregation and covariance analysis over trajectories.

mod aggregate;
mod ancova;
mod score;

pub use aggregate::{
    aggregate, mean_sem, score_trajectory, GroupBy, GroupRow, MeanSem, ScoreRecord,
};
pub use ancova::{ancova, f_survival, AncovaResult};
pub use score::{exploitation_curve, score_answer};
