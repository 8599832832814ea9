//! Experiment harness: seeded runs over estimators, seeds and realizations,
//! with per-run records, aggregates, sweeps and comparison tables.

mod config;
mod report;
mod runner;
mod tables;
mod tune;

pub use config::{
    benchmark_train_defaults, default_alpha_mode, parse_realizations, BenchSource, ConfigFile, ExperimentConfig, Origin,
    Resolved, ScheduleOverrides,
};
pub use report::{canonical_order, render, report};
pub use runner::{
    fit_unit, read_runs, run_experiment, summarise, sweep, unit_splits, write_runs, write_summary, ExperimentOutcome,
    RunRecord, SummaryRow, SweepRow, SYNTHETIC_TEST_FRACTION,
};
pub use tables::{Benchmark, DefaultAlphaTable, DefaultLambdaTable, IHDP_COEFF_LABEL, IHDP_LABEL};
pub use tune::{alpha_score, tune_alpha};
