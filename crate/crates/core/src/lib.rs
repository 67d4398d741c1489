//! Truth discovery for continuous crowdsourced labels, data-poisoning
//! attacks against it, and defenses.
//!
//! The server side aggregates an [`ObservationSet`] with CRH or GTM
//! ([`truth_discovery`]). The attacker injects workers whose values are
//! chosen to move the aggregates of targeted items ([`attack`]). The
//! defenses in [`defense`] make the aggregation robust or prune the most
//! influential workers. [`experiment`] runs seeded sweeps of all of this.
//!
//! ```
//! use crowdpoison::attack::{build_attack_plan, maximum_attack};
//! use crowdpoison::data::{generate_synthetic, SyntheticConfig};
//! use crowdpoison::metric::average_estimation_error;
//! use crowdpoison::truth_discovery::{run_crh, CrhConfig};
//!
//! let (obs, _) = generate_synthetic(&SyntheticConfig::scaled().with_seed(1)).unwrap();
//! let before = run_crh(&obs, &CrhConfig::default()).unwrap();
//! let plan = build_attack_plan(&obs, 0.2, 20, 7).unwrap();
//! let poisoned = maximum_attack(&plan).poison(&obs).unwrap();
//! let after = run_crh(&poisoned, &CrhConfig::default()).unwrap();
//! let report = average_estimation_error(&before, &after, plan.targets.iter().copied()).unwrap();
//! assert!(report.average_error > 0.0);
//! ```

pub mod attack;
pub mod data;
pub mod defense;
pub mod error;
pub mod experiment;
pub mod metric;
pub mod truth_discovery;
pub mod types;

pub use error::{Error, Result};
pub use metric::{average_estimation_error, squared_distance, EvaluationReport, RunDescriptor};
pub use types::{AggregationState, ItemId, ModelKind, Observation, ObservationSet, WorkerId};
