//! Configuration, orchestration and persistence of the six study types.

pub mod config;
pub mod plotdata;
pub mod run;

pub use config::{ExperimentConfig, StudyKind};
pub use run::{execute, run, ResultEnvelope, RunStatus};
