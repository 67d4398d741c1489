//! Identifiers, the sparse observation matrix and aggregation output.
//!
//! Worker and item identifiers are dense integers. Everything indexed by
//! them (weights, variances, aggregated values) is stored in plain vectors
//! addressed by `id.index()`, which keeps the fixed-point inner loops free of
//! hashing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkerId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl WorkerId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

/// One rating: the value `worker` reported for `item`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub worker: WorkerId,
    pub item: ItemId,
    pub value: f64,
}

impl Observation {
    pub fn new(worker: u32, item: u32, value: f64) -> Self {
        Self {
            worker: WorkerId(worker),
            item: ItemId(item),
            value,
        }
    }
}

/// Sparse worker × item matrix of continuous ratings.
///
/// Entries are kept sorted by `(worker, item)`; the per-worker and per-item
/// indexes hold positions into that vector and are rebuilt on every
/// construction, so they can never drift from the entries. Two sets compare
/// equal when their entries are equal.
#[derive(Clone, Debug, Default)]
pub struct ObservationSet {
    entries: Vec<Observation>,
    by_worker: Vec<Vec<u32>>,
    by_item: Vec<Vec<u32>>,
}

impl PartialEq for ObservationSet {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl ObservationSet {
    /// Builds a set sized to the largest identifiers present.
    pub fn new(entries: impl IntoIterator<Item = Observation>) -> Result<Self> {
        Self::with_dims(0, 0, entries)
    }

    /// Builds a set with at least `num_workers` worker slots and `num_items`
    /// item slots; identifiers beyond those grow the dimensions.
    pub fn with_dims(
        num_workers: usize,
        num_items: usize,
        entries: impl IntoIterator<Item = Observation>,
    ) -> Result<Self> {
        let mut entries: Vec<Observation> = entries.into_iter().collect();
        for o in &entries {
            if !o.value.is_finite() {
                return Err(Error::NonFiniteValue {
                    worker: o.worker,
                    item: o.item,
                });
            }
        }
        entries.sort_by_key(|o| (o.worker, o.item));
        if let Some(pair) = entries
            .windows(2)
            .find(|w| w[0].worker == w[1].worker && w[0].item == w[1].item)
        {
            return Err(Error::DuplicateObservation {
                worker: pair[0].worker,
                item: pair[0].item,
                line: None,
            });
        }
        let nw = entries
            .iter()
            .map(|o| o.worker.index() + 1)
            .max()
            .unwrap_or(0)
            .max(num_workers);
        let ni = entries
            .iter()
            .map(|o| o.item.index() + 1)
            .max()
            .unwrap_or(0)
            .max(num_items);
        let mut by_worker = vec![Vec::new(); nw];
        let mut by_item = vec![Vec::new(); ni];
        for (pos, o) in entries.iter().enumerate() {
            by_worker[o.worker.index()].push(pos as u32);
            by_item[o.item.index()].push(pos as u32);
        }
        Ok(Self {
            entries,
            by_worker,
            by_item,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of worker slots (one past the largest worker id).
    pub fn num_workers(&self) -> usize {
        self.by_worker.len()
    }

    /// Number of item slots (one past the largest item id).
    pub fn num_items(&self) -> usize {
        self.by_item.len()
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    /// Observations made by `worker`, in item order.
    pub fn worker_observations(&self, worker: WorkerId) -> impl Iterator<Item = &Observation> + '_ {
        self.by_worker
            .get(worker.index())
            .into_iter()
            .flatten()
            .map(move |&p| &self.entries[p as usize])
    }

    /// Observations of `item`, in worker order.
    pub fn item_observations(&self, item: ItemId) -> impl Iterator<Item = &Observation> + '_ {
        self.by_item
            .get(item.index())
            .into_iter()
            .flatten()
            .map(move |&p| &self.entries[p as usize])
    }

    /// The item set ℐᵤ of a worker.
    pub fn items_of(&self, worker: WorkerId) -> impl Iterator<Item = ItemId> + '_ {
        self.worker_observations(worker).map(|o| o.item)
    }

    /// The observer set 𝒰ᵢ of an item.
    pub fn workers_of(&self, item: ItemId) -> impl Iterator<Item = WorkerId> + '_ {
        self.item_observations(item).map(|o| o.worker)
    }

    pub fn observer_count(&self, item: ItemId) -> usize {
        self.by_item.get(item.index()).map_or(0, Vec::len)
    }

    pub fn observation_count(&self, worker: WorkerId) -> usize {
        self.by_worker.get(worker.index()).map_or(0, Vec::len)
    }

    /// Workers with at least one observation.
    pub fn active_workers(&self) -> impl Iterator<Item = WorkerId> + '_ {
        self.by_worker
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_empty())
            .map(|(w, _)| WorkerId(w as u32))
    }

    /// Items with at least one observation.
    pub fn observed_items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.by_item
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_empty())
            .map(|(i, _)| ItemId(i as u32))
    }

    pub fn value(&self, worker: WorkerId, item: ItemId) -> Option<f64> {
        let positions = self.by_worker.get(worker.index())?;
        positions
            .binary_search_by_key(&item, |&p| self.entries[p as usize].item)
            .ok()
            .map(|k| self.entries[positions[k] as usize].value)
    }

    /// Keeps the observations accepted by `keep`, preserving dimensions.
    pub fn filter(&self, mut keep: impl FnMut(&Observation) -> bool) -> Self {
        let entries = self.entries.iter().copied().filter(|o| keep(o));
        Self::with_dims(self.num_workers(), self.num_items(), entries)
            .expect("a subset of a valid set is valid")
    }

    /// Returns a new set holding these observations plus `extra`.
    pub fn extended(&self, extra: impl IntoIterator<Item = Observation>) -> Result<Self> {
        let entries = self.entries.iter().copied().chain(extra);
        Self::with_dims(self.num_workers(), self.num_items(), entries)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Crh,
    Gtm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Crh => f.write_str("crh"),
            ModelKind::Gtm => f.write_str("gtm"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "crh" => Ok(ModelKind::Crh),
            "gtm" => Ok(ModelKind::Gtm),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
        }
    }
}

/// Output of a truth-discovery run.
///
/// `values[i]` is the aggregated value of item `i` (`None` when nobody rated
/// it). `reliability[u]` is the CRH weight or the GTM variance of worker `u`
/// (`None` for workers without observations). GTM variances live in the
/// space the engine iterated in, i.e. z-score units when normalization is on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationState {
    pub model: ModelKind,
    pub values: Vec<Option<f64>>,
    pub reliability: Vec<Option<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl AggregationState {
    pub fn value(&self, item: ItemId) -> Option<f64> {
        self.values.get(item.index()).copied().flatten()
    }

    pub fn reliability(&self, worker: WorkerId) -> Option<f64> {
        self.reliability.get(worker.index()).copied().flatten()
    }

    /// Dense reliability vector with `fill` for workers without a value.
    pub fn reliability_or(&self, fill: f64) -> Vec<f64> {
        self.reliability.iter().map(|r| r.unwrap_or(fill)).collect()
    }

    /// `(item, value)` for every estimated item.
    pub fn estimated(&self) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (ItemId(i as u32), v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexes_are_inverse_of_entries() {
        let obs = ObservationSet::new([
            Observation::new(1, 0, 2.0),
            Observation::new(0, 0, 1.0),
            Observation::new(0, 2, 3.0),
        ])
        .unwrap();
        assert_eq!(obs.len(), 3);
        assert_eq!(obs.num_workers(), 2);
        assert_eq!(obs.num_items(), 3);
        assert_eq!(obs.items_of(WorkerId(0)).collect::<Vec<_>>(), vec![ItemId(0), ItemId(2)]);
        assert_eq!(obs.workers_of(ItemId(0)).collect::<Vec<_>>(), vec![WorkerId(0), WorkerId(1)]);
        assert_eq!(obs.observer_count(ItemId(1)), 0);
        assert_eq!(obs.value(WorkerId(0), ItemId(2)), Some(3.0));
        assert_eq!(obs.value(WorkerId(1), ItemId(2)), None);
        assert_eq!(obs.observed_items().count(), 2);
    }

    #[test]
    fn rejects_duplicates_and_non_finite() {
        let dup = ObservationSet::new([Observation::new(0, 0, 1.0), Observation::new(0, 0, 2.0)]);
        assert!(matches!(dup, Err(Error::DuplicateObservation { .. })));
        let nan = ObservationSet::new([Observation::new(0, 0, f64::NAN)]);
        assert!(matches!(nan, Err(Error::NonFiniteValue { .. })));
    }

    #[test]
    fn filter_keeps_dimensions() {
        let obs = ObservationSet::new([Observation::new(0, 0, 1.0), Observation::new(3, 4, 2.0)]).unwrap();
        let f = obs.filter(|o| o.worker == WorkerId(0));
        assert_eq!(f.len(), 1);
        assert_eq!(f.num_workers(), 4);
        assert_eq!(f.num_items(), 5);
    }
}
