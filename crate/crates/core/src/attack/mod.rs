//! Data-poisoning attacks on truth discovery.
//!
//! An [`AttackPlan`] fixes the targets, the malicious pool and the value
//! bounds. The baselines fill the plan's slots directly; the optimization
//! attacks run projected gradient ascent on the squared shift of the
//! targeted aggregates, re-running the server's engine between steps.

mod aggregate;
mod baseline;
mod bootstrap;
mod full;
mod partial;
mod plan;

pub use aggregate::{attack_gradient, attack_loss, attacked_aggregate_crh, attacked_aggregate_gtm, projected_step};
pub use baseline::{maximum_attack, random_attack};
pub use bootstrap::{
    bootstrap_estimate, bootstrap_replicates, bootstrap_summary, BootstrapSummary, WeightedSample,
};
pub use full::{initial_values, run_full_knowledge_attack, AttackOutcome, GradientAscentConfig, StepDecay};
pub use partial::{
    bootstrap_before_values, known_observations, run_partial_knowledge_attack, sample_known_workers,
    PartialKnowledgeConfig,
};
pub use plan::{build_attack_plan, malicious_count, AttackPlan, Bounds, MaliciousValues, MIN_TARGET_OBSERVERS};

pub(crate) use plan::check_attack_fraction;
