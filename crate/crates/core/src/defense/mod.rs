//! Defenses against poisoned aggregation.
//!
//! MWA replaces the CRH weighted mean with a median of group means; MIE
//! removes the workers whose absence shifts the CRH estimates the most.

mod mie;
mod mwa;

pub use mie::{
    removal_count, run_mie, select_influential_workers, set_influence, worker_influence, InfluenceDomain,
    InfluenceTable, MieConfig, MieOutcome,
};
pub use mwa::{group_sizes, mwa_update_values, run_mwa, MwaConfig};
