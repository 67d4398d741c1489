use serde::{Deserialize, Serialize};

use super::{check_iteration_settings, max_abs_change, InitialReliability};
use crate::error::{Error, Result};
use crate::metric::squared_distance;
use crate::types::{AggregationState, ItemId, ModelKind, ObservationSet, WorkerId};

/// Floor applied to a worker's distance sum before taking the log ratio, so
/// a worker that matches every aggregate exactly gets a large finite weight.
pub const ZERO_DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrhConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub initial_weight: InitialReliability,
}

impl Default for CrhConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            initial_weight: InitialReliability::Constant(1.0),
        }
    }
}

impl CrhConfig {
    pub fn validate(&self) -> Result<()> {
        check_iteration_settings(self.max_iterations, self.tolerance)?;
        if !self.initial_weight.all(f64::is_finite) {
            return Err(Error::InvalidConfig("initial weights must be finite".into()));
        }
        Ok(())
    }
}

/// Returns `(Σw, Σwx/Σw)` over `(weight, value)` pairs.
///
/// When every weight is exactly zero (a lone worker who carries all of the
/// distance gets log 1 = 0) the mean falls back to the unweighted one. The
/// mean is `None` only when nonzero weights cancel.
#[inline]
pub(crate) fn weight_sum_and_mean(pairs: impl Iterator<Item = (f64, f64)>) -> (f64, Option<f64>) {
    let (mut num, mut den, mut plain, mut n, mut all_zero) = (0.0, 0.0, 0.0, 0usize, true);
    for (w, x) in pairs {
        num += w * x;
        den += w;
        plain += x;
        n += 1;
        all_zero &= w == 0.0;
    }
    let mean = if den != 0.0 {
        Some(num / den)
    } else if all_zero && n > 0 {
        Some(plain / n as f64)
    } else {
        None
    };
    (den, mean)
}

fn check_len(what: &str, got: usize, need: usize) -> Result<()> {
    if got < need {
        return Err(Error::InvalidConfig(format!(
            "{what} has {got} entries but the observations span {need} workers"
        )));
    }
    Ok(())
}

/// Weighted mean of each item's observations.
///
/// `weights` is indexed by worker id. Items nobody rated get `None`.
pub fn crh_update_values(obs: &ObservationSet, weights: &[f64]) -> Result<Vec<Option<f64>>> {
    check_len("weight vector", weights.len(), obs.num_workers())?;
    (0..obs.num_items())
        .map(|i| {
            let item = ItemId(i as u32);
            if obs.observer_count(item) == 0 {
                return Ok(None);
            }
            let pairs = obs
                .item_observations(item)
                .map(|o| (weights[o.worker.index()], o.value));
            match weight_sum_and_mean(pairs) {
                (_, Some(v)) => Ok(Some(v)),
                (_, None) => Err(Error::DegenerateItem(item)),
            }
        })
        .collect()
}

/// Per-worker distance sums Σᵢ d(xᵢᵘ, xᵢ*) and their total.
pub(crate) fn worker_distance_sums(
    obs: &ObservationSet,
    values: &[Option<f64>],
) -> Result<(Vec<f64>, f64)> {
    let mut per_worker = vec![0.0; obs.num_workers()];
    for o in obs.entries() {
        let v = values
            .get(o.item.index())
            .copied()
            .flatten()
            .ok_or(Error::MissingValue(o.item))?;
        per_worker[o.worker.index()] += squared_distance(o.value, v);
    }
    let total = per_worker.iter().sum();
    Ok((per_worker, total))
}

fn weights_from_distances(obs: &ObservationSet, per_worker: &[f64], total: f64) -> Vec<Option<f64>> {
    (0..obs.num_workers())
        .map(|u| {
            (obs.observation_count(WorkerId(u as u32)) > 0)
                .then(|| (total / per_worker[u].max(ZERO_DISTANCE_FLOOR)).ln())
        })
        .collect()
}

/// Log-ratio weight update: wᵤ = log(total distance / distance of u).
///
/// When every worker matches every aggregate exactly the ratio is 0/0; all
/// active workers then get weight 1, which leaves the value step unchanged
/// (the weighted mean is invariant to a common scale).
pub fn crh_update_weights(obs: &ObservationSet, values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let (per_worker, total) = worker_distance_sums(obs, values)?;
    if total == 0.0 {
        return Ok((0..obs.num_workers())
            .map(|u| (obs.observation_count(WorkerId(u as u32)) > 0).then_some(1.0))
            .collect());
    }
    Ok(weights_from_distances(obs, &per_worker, total))
}

/// Σᵤ wᵤ Σᵢ d(xᵢᵘ, xᵢ*) for a CRH state.
pub fn crh_objective(obs: &ObservationSet, state: &AggregationState) -> f64 {
    debug_assert_eq!(state.model, ModelKind::Crh);
    obs.entries()
        .iter()
        .filter_map(|o| {
            let w = state.reliability(o.worker)?;
            let v = state.value(o.item)?;
            Some(w * squared_distance(o.value, v))
        })
        .sum()
}

/// The CRH outer loop with a pluggable value step (plain weighted mean for
/// CRH, median of group means for MWA). Weights always follow the log-ratio
/// update.
pub(crate) fn iterate_weighted(
    obs: &ObservationSet,
    cfg: &CrhConfig,
    value_step: impl Fn(&ObservationSet, &[f64]) -> Result<Vec<Option<f64>>>,
) -> Result<AggregationState> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let mut weights = cfg.initial_weight.dense(obs.num_workers());
    let mut values: Option<Vec<Option<f64>>> = None;
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=cfg.max_iterations {
        iterations = iter;
        let next = value_step(obs, &weights)?;
        let delta = values.as_ref().map(|prev| max_abs_change(prev, &next));
        let (per_worker, total) = worker_distance_sums(obs, &next)?;
        values = Some(next);
        if total == 0.0 {
            // Every observation equals its aggregate: a fixed point for any weights.
            converged = true;
            break;
        }
        for (w, new) in weights
            .iter_mut()
            .zip(weights_from_distances(obs, &per_worker, total))
        {
            if let Some(new) = new {
                *w = new;
            }
        }
        if delta.is_some_and(|d| d < cfg.tolerance) {
            converged = true;
            break;
        }
    }

    let reliability = (0..obs.num_workers())
        .map(|u| (obs.observation_count(WorkerId(u as u32)) > 0).then(|| weights[u]))
        .collect();
    Ok(AggregationState {
        model: ModelKind::Crh,
        values: values.expect("at least one iteration runs"),
        reliability,
        iterations,
        converged,
    })
}

pub fn run_crh(obs: &ObservationSet, cfg: &CrhConfig) -> Result<AggregationState> {
    iterate_weighted(obs, cfg, crh_update_values)
}
