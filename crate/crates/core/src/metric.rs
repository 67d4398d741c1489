//! Estimation-error metric used to score attacks and defenses.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::format_value;
use crate::error::{Error, Result};
use crate::types::{AggregationState, ItemId};

#[inline]
pub fn squared_distance(a: f64, b: f64) -> f64 {
    let d = a - b;
    d * d
}

/// Which run produced a report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub attack: String,
    pub defense: String,
    pub attack_fraction: f64,
    pub knowledge_fraction: f64,
    pub trial_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_item_error: BTreeMap<ItemId, f64>,
    pub average_error: f64,
    pub metadata: RunDescriptor,
}

/// Mean squared shift of the targeted items between two aggregations.
///
/// Targets are deduplicated and summed in id order, so the result does not
/// depend on how the caller enumerates them.
pub fn average_estimation_error(
    before: &AggregationState,
    after: &AggregationState,
    targets: impl IntoIterator<Item = ItemId>,
) -> Result<EvaluationReport> {
    let targets: BTreeSet<ItemId> = targets.into_iter().collect();
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let mut per_item_error = BTreeMap::new();
    for &t in &targets {
        let b = before.value(t).ok_or(Error::MissingValue(t))?;
        let a = after.value(t).ok_or(Error::MissingValue(t))?;
        per_item_error.insert(t, squared_distance(a, b));
    }
    let average_error = per_item_error.values().sum::<f64>() / per_item_error.len() as f64;
    Ok(EvaluationReport {
        per_item_error,
        average_error,
        metadata: RunDescriptor::default(),
    })
}

impl EvaluationReport {
    pub fn with_metadata(mut self, metadata: RunDescriptor) -> Self {
        self.metadata = metadata;
        self
    }

    pub const CSV_HEADER: [&'static str; 7] = [
        "per_item_error",
        "average_error",
        "attack",
        "defense",
        "attack_fraction",
        "knowledge_fraction",
        "trial_seed",
    ];

    /// Flat CSV row in field-declaration order; the per-item map is packed
    /// as `item=error` pairs separated by `;`.
    pub fn csv_row(&self) -> Vec<String> {
        let packed = self
            .per_item_error
            .iter()
            .map(|(i, e)| format!("{}={}", i.0, format_value(*e)))
            .collect::<Vec<_>>()
            .join(";");
        vec![
            packed,
            format_value(self.average_error),
            self.metadata.attack.clone(),
            self.metadata.defense.clone(),
            format_value(self.metadata.attack_fraction),
            format_value(self.metadata.knowledge_fraction),
            self.metadata.trial_seed.to_string(),
        ]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_row())?;
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
