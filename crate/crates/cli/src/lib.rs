//! Pipeline orchestration, configuration, file formats and chart export for
//! the relation-prediction library. The binary in this crate exposes each
//! pipeline stage as a subcommand; the stages communicate exclusively through
//! files in the run's output directory, so running them one by one produces
//! exactly the artifacts of a full `run`.

pub mod chart;
pub mod config;
pub mod formats;
pub mod pipeline;
pub mod synth;

pub use config::RunConfig;
pub use pipeline::{run_experiment, PipelineError, RunArtifacts};
