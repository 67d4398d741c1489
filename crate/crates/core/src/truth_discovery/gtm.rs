use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{check_iteration_settings, max_abs_change, InitialReliability};
use crate::error::{Error, Result};
use crate::types::{AggregationState, ItemId, ModelKind, Observation, ObservationSet, WorkerId};

/// Gaussian truth model settings. The prior `N(mu0, sigma0_sq)` and the
/// inverse-gamma hyperparameters `alpha`, `beta` apply in whatever space the
/// engine iterates in: z-scores when `normalize` is set, raw units otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtmConfig {
    pub mu0: f64,
    pub sigma0_sq: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub initial_variance: InitialReliability,
    pub normalize: bool,
}

impl Default for GtmConfig {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            sigma0_sq: 1.0,
            alpha: 1.0,
            beta: 1.0,
            max_iterations: 100,
            tolerance: 1e-6,
            initial_variance: InitialReliability::Constant(1.0),
            normalize: true,
        }
    }
}

impl GtmConfig {
    pub fn validate(&self) -> Result<()> {
        check_iteration_settings(self.max_iterations, self.tolerance)?;
        if !self.mu0.is_finite() {
            return Err(Error::InvalidConfig("mu0 must be finite".into()));
        }
        if !(self.sigma0_sq > 0.0 && self.sigma0_sq.is_finite()) {
            return Err(Error::InvalidConfig("sigma0_sq must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig("beta must be positive".into()));
        }
        if !(self.alpha > -1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig("alpha must exceed -1".into()));
        }
        if !self.initial_variance.all(|v| v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig("initial variances must be positive".into()));
        }
        Ok(())
    }
}

/// How one item's values were standardized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ItemScale {
    Standardized { mean: f64, std_dev: f64 },
    /// All observations equal (or a single observation): passed through unchanged.
    ZeroSpread,
}

/// Per-item z-score transform and its inverse.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Normalization {
    scales: Vec<Option<ItemScale>>,
}

impl Normalization {
    pub fn scale(&self, item: ItemId) -> Option<ItemScale> {
        self.scales.get(item.index()).copied().flatten()
    }

    pub fn is_zero_spread(&self, item: ItemId) -> bool {
        matches!(self.scale(item), Some(ItemScale::ZeroSpread))
    }

    pub fn normalize_value(&self, item: ItemId, x: f64) -> f64 {
        match self.scale(item) {
            Some(ItemScale::Standardized { mean, std_dev }) => (x - mean) / std_dev,
            _ => x,
        }
    }

    pub fn denormalize_value(&self, item: ItemId, z: f64) -> f64 {
        match self.scale(item) {
            Some(ItemScale::Standardized { mean, std_dev }) => mean + std_dev * z,
            _ => z,
        }
    }

    pub fn denormalize(&self, values: &[Option<f64>]) -> Vec<Option<f64>> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v.map(|z| self.denormalize_value(ItemId(i as u32), z)))
            .collect()
    }

    /// Maps a normalized observation set back to original units.
    pub fn denormalize_observations(&self, obs: &ObservationSet) -> ObservationSet {
        let entries = obs.entries().iter().map(|o| Observation {
            value: self.denormalize_value(o.item, o.value),
            ..*o
        });
        ObservationSet::with_dims(obs.num_workers(), obs.num_items(), entries)
            .expect("transform preserves validity")
    }
}

/// Per-item z-scores using the item's mean and sample standard deviation.
pub fn gtm_normalize(obs: &ObservationSet) -> Result<(ObservationSet, Normalization)> {
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let scales: Vec<Option<ItemScale>> = (0..obs.num_items())
        .map(|i| {
            let item = ItemId(i as u32);
            let n = obs.observer_count(item);
            if n == 0 {
                return None;
            }
            let mean = obs.item_observations(item).map(|o| o.value).sum::<f64>() / n as f64;
            if n < 2 {
                return Some(ItemScale::ZeroSpread);
            }
            let ss: f64 = obs
                .item_observations(item)
                .map(|o| (o.value - mean).powi(2))
                .sum();
            let std_dev = (ss / (n - 1) as f64).sqrt();
            Some(if std_dev > 0.0 {
                ItemScale::Standardized { mean, std_dev }
            } else {
                ItemScale::ZeroSpread
            })
        })
        .collect();
    let norm = Normalization { scales };
    let entries = obs.entries().iter().map(|o| Observation {
        value: norm.normalize_value(o.item, o.value),
        ..*o
    });
    let z = ObservationSet::with_dims(obs.num_workers(), obs.num_items(), entries)?;
    Ok((z, norm))
}

/// Posterior mean under the Gaussian prior given `(precision, value)` pairs.
#[inline]
pub(crate) fn posterior_mean(cfg: &GtmConfig, pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut num = cfg.mu0 / cfg.sigma0_sq;
    let mut den = 1.0 / cfg.sigma0_sq;
    for (precision, x) in pairs {
        num += precision * x;
        den += precision;
    }
    num / den
}

fn check_variance(worker: WorkerId, variance: f64) -> Result<()> {
    if variance > 0.0 && variance.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveVariance { worker, variance })
    }
}

/// E-step: precision-weighted mean of each item including the prior.
pub fn gtm_update_values(
    obs: &ObservationSet,
    variances: &[f64],
    cfg: &GtmConfig,
) -> Result<Vec<Option<f64>>> {
    if variances.len() < obs.num_workers() {
        return Err(Error::InvalidConfig(format!(
            "variance vector has {} entries but the observations span {} workers",
            variances.len(),
            obs.num_workers()
        )));
    }
    for w in obs.active_workers() {
        check_variance(w, variances[w.index()])?;
    }
    Ok((0..obs.num_items())
        .map(|i| {
            let item = ItemId(i as u32);
            (obs.observer_count(item) > 0).then(|| {
                posterior_mean(
                    cfg,
                    obs.item_observations(item)
                        .map(|o| (1.0 / variances[o.worker.index()], o.value)),
                )
            })
        })
        .collect())
}

/// M-step: σᵤ² = (2β + Σ residual²) / (2(α+1) + |ℐᵤ|).
pub fn gtm_update_variances(
    obs: &ObservationSet,
    values: &[Option<f64>],
    cfg: &GtmConfig,
) -> Result<Vec<Option<f64>>> {
    let mut residual = vec![0.0; obs.num_workers()];
    for o in obs.entries() {
        let v = values
            .get(o.item.index())
            .copied()
            .flatten()
            .ok_or(Error::MissingValue(o.item))?;
        residual[o.worker.index()] += (o.value - v).powi(2);
    }
    Ok((0..obs.num_workers())
        .map(|u| {
            let n = obs.observation_count(WorkerId(u as u32));
            (n > 0).then(|| (2.0 * cfg.beta + residual[u]) / (2.0 * (cfg.alpha + 1.0) + n as f64))
        })
        .collect())
}

pub fn run_gtm(obs: &ObservationSet, cfg: &GtmConfig) -> Result<AggregationState> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let (work, norm): (Cow<'_, ObservationSet>, Normalization) = if cfg.normalize {
        let (z, n) = gtm_normalize(obs)?;
        (Cow::Owned(z), n)
    } else {
        (Cow::Borrowed(obs), Normalization::default())
    };

    let mut variances = cfg.initial_variance.dense(obs.num_workers());
    let mut raw: Option<Vec<Option<f64>>> = None;
    let mut iterations = 0;
    let mut converged = false;
    for iter in 1..=cfg.max_iterations {
        iterations = iter;
        let z_values = gtm_update_values(&work, &variances, cfg)?;
        let next_raw = norm.denormalize(&z_values);
        let delta = raw.as_ref().map(|prev| max_abs_change(prev, &next_raw));
        raw = Some(next_raw);
        for (v, new) in variances
            .iter_mut()
            .zip(gtm_update_variances(&work, &z_values, cfg)?)
        {
            if let Some(new) = new {
                *v = new;
            }
        }
        if delta.is_some_and(|d| d < cfg.tolerance) {
            converged = true;
            break;
        }
    }

    let reliability = (0..obs.num_workers())
        .map(|u| (obs.observation_count(WorkerId(u as u32)) > 0).then(|| variances[u]))
        .collect();
    Ok(AggregationState {
        model: ModelKind::Gtm,
        values: raw.expect("at least one iteration runs"),
        reliability,
        iterations,
        converged,
    })
}
