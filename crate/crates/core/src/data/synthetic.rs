use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ItemId, Observation, ObservationSet, WorkerId};

/// Recipe for a synthetic dataset: item truths μᵢ ~ U(truth_low,
/// truth_high), worker noise σᵤ ~ U(sigma_low, sigma_high), and
/// xᵢᵘ ~ N(μᵢ, σᵤ²) on `num_values` distinct (worker, item) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_workers: usize,
    pub num_items: usize,
    pub num_values: usize,
    pub truth_low: f64,
    pub truth_high: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_workers: 500,
            num_items: 4000,
            num_values: 50_000,
            truth_low: 20.0,
            truth_high: 30.0,
            sigma_low: 0.0,
            sigma_high: 30.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// A tenth of the default size in workers and values, an eighth in
    /// items; same density of ~10 values per item.
    pub fn scaled() -> Self {
        Self {
            num_workers: 100,
            num_items: 500,
            num_values: 5000,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.num_workers.saturating_mul(self.num_items);
        if self.num_values > cells {
            return Err(Error::InvalidConfig(format!(
                "{} values do not fit in {} workers x {} items",
                self.num_values, self.num_workers, self.num_items
            )));
        }
        if !(self.truth_low <= self.truth_high) {
            return Err(Error::InvalidConfig("truth_low must not exceed truth_high".into()));
        }
        if !(0.0 <= self.sigma_low && self.sigma_low <= self.sigma_high) {
            return Err(Error::InvalidConfig("need 0 <= sigma_low <= sigma_high".into()));
        }
        if self.num_workers > u32::MAX as usize || self.num_items > u32::MAX as usize {
            return Err(Error::InvalidConfig("identifiers must fit in 32 bits".into()));
        }
        Ok(())
    }
}

/// The parameters a synthetic dataset was drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// μᵢ indexed by item id.
    pub values: Vec<f64>,
    /// σᵤ indexed by worker id.
    pub worker_sigmas: Vec<f64>,
}

impl GroundTruth {
    pub fn value(&self, item: ItemId) -> f64 {
        self.values[item.index()]
    }

    pub fn sigma(&self, worker: WorkerId) -> f64 {
        self.worker_sigmas[worker.index()]
    }
}

fn uniform(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    if high > low {
        rng.random_range(low..high)
    } else {
        low
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(ObservationSet, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let values: Vec<f64> = (0..cfg.num_items)
        .map(|_| uniform(&mut rng, cfg.truth_low, cfg.truth_high))
        .collect();
    let worker_sigmas: Vec<f64> = (0..cfg.num_workers)
        .map(|_| uniform(&mut rng, cfg.sigma_low, cfg.sigma_high))
        .collect();

    let mut cells = index::sample(&mut rng, cfg.num_workers * cfg.num_items, cfg.num_values).into_vec();
    cells.sort_unstable();
    let mut entries = Vec::with_capacity(cells.len());
    for cell in cells {
        let (w, i) = (cell / cfg.num_items, cell % cfg.num_items);
        let sigma = worker_sigmas[w];
        let x = if sigma > 0.0 {
            Normal::new(values[i], sigma)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?
                .sample(&mut rng)
        } else {
            values[i]
        };
        entries.push(Observation::new(w as u32, i as u32, x));
    }
    let obs = ObservationSet::with_dims(cfg.num_workers, cfg.num_items, entries)?;
    Ok((
        obs,
        GroundTruth {
            values,
            worker_sigmas,
        },
    ))
}
