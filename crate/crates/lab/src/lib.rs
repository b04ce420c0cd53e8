//! Experiment harness for `szasz-core`: thread-parallel Monte Carlo, JSON
//! configuration, CSV/JSON reports and the drivers behind the `szasz` CLI.

pub mod config;
pub mod experiments;
pub mod parallel;
pub mod report;

pub use config::{ConfigOverlay, Experiment, ExperimentConfig, Format, GridConfig};
pub use experiments::{run, ConvergenceReport};
pub use report::{emit_report, ReportRow};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] szasz_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}
