//! Experiment orchestration for the EDM simulator: specs, runs, sweeps,
//! metrics and figures. The `edmsim` binary is a thin layer over this.

pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod spec;

pub use experiment::{execute, run_experiment, run_sweep, sweep_cells, Outcome};
pub use metrics::{normalized_mct, Summary};
pub use plot::emit_plots;
pub use spec::ExperimentSpec;
