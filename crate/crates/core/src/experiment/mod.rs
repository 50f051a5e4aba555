//! Config-driven sweeps, fits and reports.

pub mod config;
pub mod diagnostics;
pub mod report;
pub mod sweep;

pub use config::{tau_grid, BathModel, Experiment, ExperimentConfig};
pub use sweep::{
    run_size_crossover, run_sweep, run_sweep_with_cache, CrossoverResult, FitEntry, IsolatedCache, Leg, SweepResult,
    SweepRow, Triple,
};
