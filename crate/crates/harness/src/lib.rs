//! Experiment driver for `ntklab`: configuration, seeded runs, parallel
//! sweeps, aggregation into CSV/text tables, plot data and SVG charts.
//!
//! All outputs are pure functions of the configuration; run seeds are
//! `derive_seed(master_seed, [S, m, repetition])`.

pub mod commands;
pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{ExperimentConfig, MPreset, MRule};
pub use run::{run_seed, run_single, RunRecord, RunSpec};
pub use sweep::{aggregate, run_sweep, sweep_csv, Stat, SweepRow};
