//! Orchestration for the diffuse-interface experiments: configured runs,
//! epsilon sweeps with rate fits, exponential envelopes, calibration checks
//! and plain-text reports.

pub mod analysis;
pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod sweep;
pub mod validate;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
