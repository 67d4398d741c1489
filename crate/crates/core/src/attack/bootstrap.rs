use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::truth_discovery::{posterior_mean, weight_sum_and_mean, ModelConfig};
use crate::types::ItemId;

/// A worker's value on one item together with its reliability (CRH weight
/// or GTM variance).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSample {
    pub value: f64,
    pub reliability: f64,
}

/// Bootstrap replicates and their spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Mean of the replicate aggregates.
    pub estimate: f64,
    /// Sample standard deviation of the replicate aggregates.
    pub spread: f64,
    /// Monte Carlo standard error of `estimate`, `spread / √B`.
    pub standard_error: f64,
    pub rounds: usize,
}

/// Aggregates the samples at `indices` with the model's single-item rule:
/// weighted mean for CRH, posterior mean for GTM.
pub(crate) fn aggregate_indices(
    samples: &[WeightedSample],
    indices: &[usize],
    model: &ModelConfig,
    item: ItemId,
) -> Result<f64> {
    let picked = indices.iter().map(|&k| samples[k]);
    match model {
        ModelConfig::Crh(_) => weight_sum_and_mean(picked.map(|s| (s.reliability, s.value)))
            .1
            .ok_or(Error::DegenerateItem(item)),
        ModelConfig::Gtm(cfg) => Ok(posterior_mean(cfg, picked.map(|s| (1.0 / s.reliability, s.value)))),
    }
}

/// `rounds` index vectors, each `n` draws with replacement from `0..n`.
pub(crate) fn resample_indices(n: usize, rounds: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    (0..rounds)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect()
}

fn check_inputs(samples: &[WeightedSample], rounds: usize, model: &ModelConfig) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if rounds == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one round".into()));
    }
    if matches!(model, ModelConfig::Gtm(_)) {
        if let Some(s) = samples.iter().find(|s| !(s.reliability > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "bootstrap sample has nonpositive variance {}",
                s.reliability
            )));
        }
    }
    Ok(())
}

/// The `rounds` replicate aggregates of one item.
pub fn bootstrap_replicates(
    samples: &[WeightedSample],
    model: &ModelConfig,
    rounds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_inputs(samples, rounds, model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    resample_indices(samples.len(), rounds, &mut rng)
        .iter()
        .map(|idx| aggregate_indices(samples, idx, model, ItemId(0)))
        .collect()
}

/// Mean of the replicate aggregates.
pub fn bootstrap_estimate(
    samples: &[WeightedSample],
    model: &ModelConfig,
    rounds: usize,
    seed: u64,
) -> Result<f64> {
    Ok(bootstrap_summary(samples, model, rounds, seed)?.estimate)
}

pub fn bootstrap_summary(
    samples: &[WeightedSample],
    model: &ModelConfig,
    rounds: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    let reps = bootstrap_replicates(samples, model, rounds, seed)?;
    Ok(summarize(&reps))
}

pub(crate) fn summarize(reps: &[f64]) -> BootstrapSummary {
    let b = reps.len() as f64;
    let estimate = reps.iter().sum::<f64>() / b;
    let spread = if reps.len() > 1 {
        (reps.iter().map(|r| (r - estimate).powi(2)).sum::<f64>() / (b - 1.0)).sqrt()
    } else {
        0.0
    };
    BootstrapSummary {
        estimate,
        spread,
        standard_error: spread / b.sqrt(),
        rounds: reps.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth_discovery::{CrhConfig, GtmConfig};

    fn crh() -> ModelConfig {
        ModelConfig::Crh(CrhConfig::default())
    }

    fn samples(values: &[f64]) -> Vec<WeightedSample> {
        values
            .iter()
            .map(|&value| WeightedSample { value, reliability: 1.0 })
            .collect()
    }

    #[test]
    fn singleton_and_constant_inputs() {
        for b in [1, 7, 500] {
            assert_eq!(bootstrap_estimate(&samples(&[4.5]), &crh(), b, 3).unwrap(), 4.5);
        }
        let est = bootstrap_estimate(&samples(&[2.0; 6]), &crh(), 100, 1).unwrap();
        assert!((est - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gtm_singleton_matches_posterior() {
        let model = ModelConfig::Gtm(GtmConfig::default());
        let s = [WeightedSample { value: 2.0, reliability: 1.0 }];
        assert_eq!(bootstrap_estimate(&s, &model, 20, 0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_empty_and_zero_rounds() {
        assert!(matches!(
            bootstrap_estimate(&[], &crh(), 10, 0),
            Err(Error::EmptyObservations)
        ));
        assert!(bootstrap_estimate(&samples(&[1.0]), &crh(), 0, 0).is_err());
    }

    #[test]
    fn seeded() {
        let s = samples(&[1.0, 5.0, 2.0, 8.0]);
        assert_eq!(
            bootstrap_replicates(&s, &crh(), 50, 4).unwrap(),
            bootstrap_replicates(&s, &crh(), 50, 4).unwrap()
        );
    }
}
