use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::truth_discovery::{crh_update_values, iterate_weighted, weight_sum_and_mean, CrhConfig, InitialReliability};
use crate::types::{AggregationState, ItemId, ObservationSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MwaConfig {
    /// Number of groups L.
    pub num_groups: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub initial_weight: InitialReliability,
}

impl Default for MwaConfig {
    fn default() -> Self {
        let crh = CrhConfig::default();
        Self {
            num_groups: 5,
            max_iterations: crh.max_iterations,
            tolerance: crh.tolerance,
            initial_weight: crh.initial_weight,
        }
    }
}

impl MwaConfig {
    pub fn with_groups(num_groups: usize) -> Self {
        Self {
            num_groups,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_groups == 0 {
            return Err(Error::InvalidConfig("num_groups must be at least 1".into()));
        }
        self.crh().validate()
    }

    fn crh(&self) -> CrhConfig {
        CrhConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            initial_weight: self.initial_weight.clone(),
        }
    }
}

/// Sizes of the contiguous groups for `n` observers and `groups` requested
/// groups: min(groups, n) groups, as even as possible, earlier ones larger.
pub fn group_sizes(n: usize, groups: usize) -> Vec<usize> {
    let l = groups.min(n).max(1);
    let (base, rem) = (n / l, n % l);
    (0..l).map(|g| base + usize::from(g < rem)).collect()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median of the weighted means of value-sorted observer groups.
///
/// Observers are sorted by value (worker id breaks ties) and split with
/// [`group_sizes`]. With a single group this is exactly
/// [`crh_update_values`].
pub fn mwa_update_values(obs: &ObservationSet, weights: &[f64], num_groups: usize) -> Result<Vec<Option<f64>>> {
    if num_groups == 0 {
        return Err(Error::InvalidConfig("num_groups must be at least 1".into()));
    }
    if num_groups == 1 {
        return crh_update_values(obs, weights);
    }
    if weights.len() < obs.num_workers() {
        return Err(Error::InvalidConfig(format!(
            "weight vector has {} entries but the observations span {} workers",
            weights.len(),
            obs.num_workers()
        )));
    }
    (0..obs.num_items())
        .map(|i| {
            let item = ItemId(i as u32);
            let n = obs.observer_count(item);
            if n == 0 {
                return Ok(None);
            }
            let mut rows: Vec<(f64, f64, u32)> = obs
                .item_observations(item)
                .map(|o| (o.value, weights[o.worker.index()], o.worker.0))
                .collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
            let mut means = Vec::with_capacity(num_groups);
            let mut start = 0;
            for size in group_sizes(n, num_groups) {
                let group = &rows[start..start + size];
                start += size;
                let mean = weight_sum_and_mean(group.iter().map(|&(x, w, _)| (w, x)))
                    .1
                    .ok_or(Error::DegenerateItem(item))?;
                means.push(mean);
            }
            means.sort_by(f64::total_cmp);
            Ok(Some(median(&means)))
        })
        .collect()
}

/// CRH with the value step replaced by [`mwa_update_values`]. No worker is
/// excluded.
pub fn run_mwa(obs: &ObservationSet, cfg: &MwaConfig) -> Result<AggregationState> {
    cfg.validate()?;
    let l = cfg.num_groups;
    iterate_weighted(obs, &cfg.crh(), |o, w| mwa_update_values(o, w, l))
}
