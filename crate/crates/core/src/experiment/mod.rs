//! Seeded sweeps over attack size and attacker knowledge.
//!
//! An [`ExperimentConfig`] (a TOML document) names the dataset, the server
//! model, one attack and one defense, and the grid of attack and knowledge
//! fractions. [`run_experiment`] repeats every grid point for `trials`
//! seeds, in parallel, and returns a [`SweepResult`] that serializes to CSV
//! and JSON.

mod config;
mod report;
mod runner;

pub use config::{
    AttackKind, DatasetSpec, DefenseKind, ExperimentConfig, MieSettings, MwaSettings, PartialSettings,
};
pub use report::{
    emit_report, from_json, load_report, read_csv, to_json, write_csv, ReportFormat, SweepPoint, SweepResult,
    TrialFailure, TrialRow, CSV_COLUMNS,
};
pub use runner::{
    aggregate_rows, execute_attack, execute_defense, run_experiment, run_experiment_on, run_trial, DefenseOutput,
    TrialOutput,
};
