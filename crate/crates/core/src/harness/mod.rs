//! Experiment orchestration: configuration, data, multi-seed runs, sweeps,
//! accuracy metrics and plot data.

pub mod config;
pub mod data;
pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod sweep;

pub use config::{ExperimentConfig, SweepAxis};
pub use experiment::{run_experiment, Experiment, MeanSe, RunSummary, SeedRun};
pub use metrics::{evaluate, Evaluation};
pub use plot::emit_plot_data;
pub use sweep::{run_sweep, SweepCell, SweepResult};
