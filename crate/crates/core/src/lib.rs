//! Simulated object-picking environment for measuring how efficiently an
//! agent discovers a hidden reward rule.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod metrics;
pub mod policy;
pub mod trajectory;
