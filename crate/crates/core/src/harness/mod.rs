//! Experiment runner: configuration, artifacts, sweeps and plot-data export.

pub mod artifacts;
pub mod config;
pub mod export;
pub mod sweep;

pub use artifacts::{resume, run_experiment, run_experiment_with, summarize, RunControl, Summary};
pub use config::{EnvironmentKind, Mode, RunConfig, SweepCell, SweepConfig, OUTPUT_ROOT_VAR};
pub use export::{export_curves, ExportedCurves};
pub use sweep::{run_sweep, CellOutcome, SweepOutcome};
