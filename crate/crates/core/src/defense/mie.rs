use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::check_attack_fraction;
use crate::error::{Error, Result};
use crate::metric::squared_distance;
use crate::truth_discovery::{run_crh, CrhConfig};
use crate::types::{AggregationState, ItemId, ObservationSet, WorkerId};

/// Which items the influence of a worker sums over. Either way the sum is
/// divided by the number of items the worker rated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceDomain {
    /// Every estimated item; shifts reach unrated items through the weights.
    #[default]
    AllItems,
    /// Only the items the worker rated.
    RatedItems,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MieConfig {
    /// The malicious share α the server assumes.
    pub assumed_attack_fraction: f64,
    pub engine: CrhConfig,
    pub influence_domain: InfluenceDomain,
}

impl Default for MieConfig {
    fn default() -> Self {
        Self {
            assumed_attack_fraction: 0.2,
            engine: CrhConfig::default(),
            influence_domain: InfluenceDomain::AllItems,
        }
    }
}

impl MieConfig {
    pub fn validate(&self) -> Result<()> {
        check_attack_fraction(self.assumed_attack_fraction)?;
        self.engine.validate()
    }
}

/// φ(u) against a precomputed aggregation of the full worker set.
fn influence_against(
    obs: &ObservationSet,
    base: &AggregationState,
    u: WorkerId,
    engine: &CrhConfig,
    domain: InfluenceDomain,
) -> Result<f64> {
    let rated = obs.observation_count(u);
    if rated == 0 {
        return Err(Error::UnknownWorker(u));
    }
    let rest = obs.filter(|o| o.worker != u);
    if rest.is_empty() {
        return Ok(0.0);
    }
    let without = run_crh(&rest, engine)?;
    let shift = |i: ItemId| -> f64 {
        match (base.value(i), without.value(i)) {
            (Some(a), Some(b)) => squared_distance(a, b),
            _ => 0.0,
        }
    };
    let total: f64 = match domain {
        InfluenceDomain::AllItems => obs.observed_items().map(shift).sum(),
        InfluenceDomain::RatedItems => obs.items_of(u).map(shift).sum(),
    };
    Ok(total / rated as f64)
}

/// Mean squared shift of the CRH estimates when `u` is removed.
///
/// Items that lose their last observer have no counterfactual estimate and
/// contribute nothing.
pub fn worker_influence(obs: &ObservationSet, u: WorkerId, engine: &CrhConfig, domain: InfluenceDomain) -> Result<f64> {
    if obs.observation_count(u) == 0 {
        return Err(Error::UnknownWorker(u));
    }
    let base = run_crh(obs, engine)?;
    influence_against(obs, &base, u, engine, domain)
}

/// φ for every active worker, with one counterfactual CRH run per worker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTable {
    pub scores: BTreeMap<WorkerId, f64>,
}

impl InfluenceTable {
    pub fn compute(obs: &ObservationSet, engine: &CrhConfig, domain: InfluenceDomain) -> Result<Self> {
        let base = run_crh(obs, engine)?;
        let workers: Vec<WorkerId> = obs.active_workers().collect();
        let scores = workers
            .par_iter()
            .map(|&u| Ok((u, influence_against(obs, &base, u, engine, domain)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self { scores })
    }

    pub fn score(&self, u: WorkerId) -> Option<f64> {
        self.scores.get(&u).copied()
    }

    /// 𝕀(A) = Σ_{u∈A} φ(u). Workers outside the table count as zero.
    pub fn set_influence<'a>(&self, set: impl IntoIterator<Item = &'a WorkerId>) -> f64 {
        let set: BTreeSet<WorkerId> = set.into_iter().copied().collect();
        set.iter().filter_map(|u| self.score(*u)).sum()
    }

    /// Greedy selection of `k` workers maximizing 𝕀; since φ does not
    /// depend on what was already picked, each round takes the remaining
    /// worker with the largest score, smaller id first on ties.
    pub fn select(&self, k: usize) -> Result<Vec<(WorkerId, f64)>> {
        if k > self.scores.len() {
            return Err(Error::SelectionTooLarge {
                requested: k,
                available: self.scores.len(),
            });
        }
        let mut ranked: Vec<(WorkerId, f64)> = self.scores.iter().map(|(&u, &s)| (u, s)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked)
    }
}

pub fn set_influence(obs: &ObservationSet, set: &[WorkerId], engine: &CrhConfig, domain: InfluenceDomain) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    if let Some(&u) = set.iter().find(|&&u| obs.observation_count(u) == 0) {
        return Err(Error::UnknownWorker(u));
    }
    let table = InfluenceTable::compute(obs, engine, domain)?;
    Ok(table.set_influence(set))
}

pub fn select_influential_workers(
    obs: &ObservationSet,
    k: usize,
    engine: &CrhConfig,
    domain: InfluenceDomain,
) -> Result<Vec<WorkerId>> {
    let available = obs.active_workers().count();
    if k > available {
        return Err(Error::SelectionTooLarge { requested: k, available });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let table = InfluenceTable::compute(obs, engine, domain)?;
    Ok(table.select(k)?.into_iter().map(|(u, _)| u).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MieOutcome {
    pub state: AggregationState,
    /// Removed workers with their influence scores, highest first.
    pub removed: Vec<(WorkerId, f64)>,
    /// Items that lost every observer to the removal.
    pub unestimable: Vec<ItemId>,
}

/// Number of workers MIE removes: ⌊α·|ℳ|⌋.
pub fn removal_count(assumed_attack_fraction: f64, active_workers: usize) -> usize {
    (assumed_attack_fraction * active_workers as f64 + 1e-9).floor() as usize
}

/// Removes the ⌊α·|ℳ|⌋ most influential workers and runs CRH on the rest.
pub fn run_mie(obs: &ObservationSet, cfg: &MieConfig) -> Result<MieOutcome> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let k = removal_count(cfg.assumed_attack_fraction, obs.active_workers().count());
    if k == 0 {
        return Ok(MieOutcome {
            state: run_crh(obs, &cfg.engine)?,
            removed: Vec::new(),
            unestimable: Vec::new(),
        });
    }
    let table = InfluenceTable::compute(obs, &cfg.engine, cfg.influence_domain)?;
    let removed = table.select(k)?;
    let gone: BTreeSet<WorkerId> = removed.iter().map(|&(u, _)| u).collect();
    let rest = obs.filter(|o| !gone.contains(&o.worker));
    let unestimable: Vec<ItemId> = obs
        .observed_items()
        .filter(|&i| rest.observer_count(i) == 0)
        .collect();
    if !unestimable.is_empty() {
        log::warn!("MIE removal left {} items without observers", unestimable.len());
    }
    let state = run_crh(&rest, &cfg.engine)?;
    Ok(MieOutcome {
        state,
        removed,
        unestimable,
    })
}
