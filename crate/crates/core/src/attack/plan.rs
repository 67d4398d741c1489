use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ItemId, Observation, ObservationSet, WorkerId};

/// Targets must be rated by at least this many normal workers.
pub const MIN_TARGET_OBSERVERS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Self {
        debug_assert!(min <= max);
        Self { min, max }
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.min <= x && x <= self.max
    }

    /// Range of the given values; `None` for an empty iterator.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(Bounds::new(v, v)),
            Some(b) => Some(Bounds::new(b.min.min(v), b.max.max(v))),
        })
    }
}

/// Who attacks which items, and within which value range.
///
/// Malicious workers receive ids directly after the normal workers' id space
/// so the poisoned observation set can hold both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub attack_fraction: f64,
    pub targets: Vec<ItemId>,
    pub malicious_pool: Vec<WorkerId>,
    pub per_item_attackers: BTreeMap<ItemId, Vec<WorkerId>>,
    pub bounds: BTreeMap<ItemId, Bounds>,
    pub rng_seed: u64,
}

/// ⌊α·n / (1 − α)⌋, the number of malicious workers that makes them an α
/// share of the combined population of `n` normal workers plus attackers.
pub fn malicious_count(attack_fraction: f64, n: usize) -> usize {
    // Nudge so that exact ratios such as 0.2·500/0.8 = 125 do not floor to 124.
    (attack_fraction * n as f64 / (1.0 - attack_fraction) + 1e-9).floor() as usize
}

pub(crate) fn check_attack_fraction(attack_fraction: f64) -> Result<()> {
    if !(0.0..0.5).contains(&attack_fraction) {
        return Err(Error::InvalidConfig(format!(
            "attack fraction must lie in [0, 0.5), got {attack_fraction}"
        )));
    }
    Ok(())
}

/// Samples targets among items with at least [`MIN_TARGET_OBSERVERS`]
/// observers, sizes the malicious pool, and assigns attackers per target.
pub fn build_attack_plan(
    obs: &ObservationSet,
    attack_fraction: f64,
    num_targets: usize,
    seed: u64,
) -> Result<AttackPlan> {
    check_attack_fraction(attack_fraction)?;
    if num_targets == 0 {
        return Err(Error::EmptyTargets);
    }
    let eligible: Vec<ItemId> = obs
        .observed_items()
        .filter(|&i| obs.observer_count(i) >= MIN_TARGET_OBSERVERS)
        .collect();
    if eligible.len() < num_targets {
        return Err(Error::InsufficientEligibleItems {
            eligible: eligible.len(),
            requested: num_targets,
            min_observers: MIN_TARGET_OBSERVERS,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets: Vec<ItemId> = index::sample(&mut rng, eligible.len(), num_targets)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    targets.sort();

    let normal_workers = obs.active_workers().count();
    let first_id = obs.num_workers() as u32;
    let pool_size = malicious_count(attack_fraction, normal_workers);
    let malicious_pool: Vec<WorkerId> = (0..pool_size as u32).map(|k| WorkerId(first_id + k)).collect();

    let mut per_item_attackers = BTreeMap::new();
    let mut bounds = BTreeMap::new();
    for &t in &targets {
        let count = malicious_count(attack_fraction, obs.observer_count(t)).min(pool_size);
        let mut attackers: Vec<WorkerId> = index::sample(&mut rng, pool_size, count)
            .into_iter()
            .map(|k| malicious_pool[k])
            .collect();
        attackers.sort();
        per_item_attackers.insert(t, attackers);
        let b = Bounds::of(obs.item_observations(t).map(|o| o.value)).expect("targets are observed");
        bounds.insert(t, b);
    }

    Ok(AttackPlan {
        attack_fraction,
        targets,
        malicious_pool,
        per_item_attackers,
        bounds,
        rng_seed: seed,
    })
}

impl AttackPlan {
    pub fn attackers(&self, item: ItemId) -> &[WorkerId] {
        self.per_item_attackers.get(&item).map_or(&[], Vec::as_slice)
    }

    pub fn is_assigned(&self, worker: WorkerId, item: ItemId) -> bool {
        self.attackers(item).binary_search(&worker).is_ok()
    }

    /// Every `(attacker, target)` pair in `(target, attacker)` order.
    pub fn assignments(&self) -> impl Iterator<Item = (WorkerId, ItemId)> + '_ {
        self.per_item_attackers
            .iter()
            .flat_map(|(&t, ws)| ws.iter().map(move |&w| (w, t)))
    }

    pub fn num_assignments(&self) -> usize {
        self.per_item_attackers.values().map(Vec::len).sum()
    }

    pub fn bounds_of(&self, item: ItemId) -> Option<Bounds> {
        self.bounds.get(&item).copied()
    }

    /// Checks the structural invariants against the normal observations.
    pub fn validate(&self, obs: &ObservationSet) -> Result<()> {
        for (&t, attackers) in &self.per_item_attackers {
            if attackers.iter().any(|a| self.malicious_pool.binary_search(a).is_err()) {
                return Err(Error::InvalidConfig(format!("item {t}: attacker outside the pool")));
            }
            if attackers.len() >= obs.observer_count(t) {
                return Err(Error::InvalidConfig(format!(
                    "item {t}: attackers do not stay a minority"
                )));
            }
            let b = self
                .bounds_of(t)
                .ok_or_else(|| Error::InvalidConfig(format!("item {t}: no bounds")))?;
            if !(b.min <= b.max) {
                return Err(Error::InvalidConfig(format!("item {t}: inverted bounds")));
            }
        }
        Ok(())
    }
}

/// The attackers' decision variables, one value per `(attacker, target)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MaliciousValues {
    by_item: BTreeMap<ItemId, BTreeMap<WorkerId, f64>>,
}

impl MaliciousValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// One value per plan assignment, computed by `value`.
    pub fn from_plan(plan: &AttackPlan, mut value: impl FnMut(WorkerId, ItemId) -> f64) -> Self {
        let mut mal = Self::new();
        for (w, t) in plan.assignments() {
            mal.set(w, t, value(w, t));
        }
        mal
    }

    pub fn set(&mut self, worker: WorkerId, item: ItemId, value: f64) {
        self.by_item.entry(item).or_default().insert(worker, value);
    }

    pub fn get(&self, worker: WorkerId, item: ItemId) -> Option<f64> {
        self.by_item.get(&item)?.get(&worker).copied()
    }

    /// `(attacker, value)` pairs on one item.
    pub fn on_item(&self, item: ItemId) -> impl Iterator<Item = (WorkerId, f64)> + '_ {
        self.by_item
            .get(&item)
            .into_iter()
            .flatten()
            .map(|(&w, &v)| (w, v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (WorkerId, ItemId, f64)> + '_ {
        self.by_item
            .iter()
            .flat_map(|(&t, m)| m.iter().map(move |(&w, &v)| (w, t, v)))
    }

    pub fn len(&self) -> usize {
        self.by_item.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.iter().map(|(worker, item, value)| Observation { worker, item, value })
    }

    /// Normal observations plus these malicious values.
    pub fn poison(&self, obs: &ObservationSet) -> Result<ObservationSet> {
        obs.extended(self.observations())
    }

    /// Whether every value lies within its item's plan bounds.
    pub fn within_bounds(&self, plan: &AttackPlan) -> bool {
        self.iter()
            .all(|(_, t, v)| plan.bounds_of(t).is_some_and(|b| b.contains(v)))
    }
}
