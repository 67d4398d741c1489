//! CRH and GTM truth discovery.
//!
//! Both engines alternate between estimating item values with reliabilities
//! held fixed and re-estimating reliabilities with values held fixed. They
//! stop when the largest absolute change of any aggregated value (in the
//! original units) drops below `tolerance`, or after `max_iterations` rounds.

mod crh;
mod gtm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AggregationState, ModelKind, ObservationSet, WorkerId};

pub(crate) use crh::{iterate_weighted, weight_sum_and_mean};
pub use crh::{
    crh_objective, crh_update_values, crh_update_weights, run_crh, CrhConfig, ZERO_DISTANCE_FLOOR,
};
pub(crate) use gtm::posterior_mean;
pub use gtm::{
    gtm_normalize, gtm_update_values, gtm_update_variances, run_gtm, GtmConfig, ItemScale,
    Normalization,
};

/// Starting reliability (CRH weight or GTM variance) for each worker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialReliability {
    /// Every worker starts at the same value.
    Constant(f64),
    /// Worker `u` starts at `values[u]`; workers past the end use `default`.
    PerWorker { values: Vec<f64>, default: f64 },
}

impl Default for InitialReliability {
    fn default() -> Self {
        InitialReliability::Constant(1.0)
    }
}

impl InitialReliability {
    pub fn get(&self, worker: WorkerId) -> f64 {
        match self {
            InitialReliability::Constant(v) => *v,
            InitialReliability::PerWorker { values, default } => {
                values.get(worker.index()).copied().unwrap_or(*default)
            }
        }
    }

    /// Draws one value per worker from Uniform(low, high), as in the
    /// randomly initialized ("Unif-init") experiments.
    pub fn random_uniform(num_workers: usize, low: f64, high: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..num_workers)
            .map(|_| if high > low { rng.random_range(low..high) } else { low })
            .collect();
        InitialReliability::PerWorker {
            values,
            default: 0.5 * (low + high),
        }
    }

    pub(crate) fn dense(&self, num_workers: usize) -> Vec<f64> {
        (0..num_workers).map(|w| self.get(WorkerId(w as u32))).collect()
    }

    fn all(&self, mut pred: impl FnMut(f64) -> bool) -> bool {
        match self {
            InitialReliability::Constant(v) => pred(*v),
            InitialReliability::PerWorker { values, default } => {
                values.iter().all(|&v| pred(v)) && pred(*default)
            }
        }
    }
}

/// A truth-discovery engine together with its configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelConfig {
    Crh(CrhConfig),
    Gtm(GtmConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Crh(_) => ModelKind::Crh,
            ModelConfig::Gtm(_) => ModelKind::Gtm,
        }
    }

    pub fn run(&self, obs: &ObservationSet) -> Result<AggregationState> {
        match self {
            ModelConfig::Crh(cfg) => run_crh(obs, cfg),
            ModelConfig::Gtm(cfg) => run_gtm(obs, cfg),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Crh(cfg) => cfg.validate(),
            ModelConfig::Gtm(cfg) => cfg.validate(),
        }
    }

    /// Same engine with a different starting reliability.
    pub fn with_initial(&self, init: InitialReliability) -> Self {
        match self {
            ModelConfig::Crh(cfg) => ModelConfig::Crh(CrhConfig {
                initial_weight: init,
                ..cfg.clone()
            }),
            ModelConfig::Gtm(cfg) => ModelConfig::Gtm(GtmConfig {
                initial_variance: init,
                ..cfg.clone()
            }),
        }
    }
}

fn check_iteration_settings(max_iterations: usize, tolerance: f64) -> Result<()> {
    if max_iterations == 0 {
        return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tolerance}")));
    }
    Ok(())
}

/// Largest absolute change between two value vectors over items present in both.
pub(crate) fn max_abs_change(prev: &[Option<f64>], next: &[Option<f64>]) -> f64 {
    prev.iter()
        .zip(next)
        .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
        .fold(0.0, f64::max)
}
