use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bootstrap::{aggregate_indices, resample_indices, WeightedSample};
use super::full::{ascend, AttackOutcome, GradientAscentConfig};
use super::plan::{AttackPlan, Bounds};
use crate::error::{Error, Result};
use crate::truth_discovery::{
    crh_update_weights, gtm_normalize, gtm_update_variances, max_abs_change, ModelConfig,
    Normalization,
};
use crate::types::{ItemId, ObservationSet, WorkerId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialKnowledgeConfig {
    /// Share of each target's normal observers the attacker can see.
    pub knowledge_fraction: f64,
    /// Bootstrap rounds B per target.
    pub bootstrap_rounds: usize,
    /// `false` estimates the before-attack values from the observed
    /// subsets directly ("No-boot").
    pub use_bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for PartialKnowledgeConfig {
    fn default() -> Self {
        Self {
            knowledge_fraction: 1.0,
            bootstrap_rounds: 500,
            use_bootstrap: true,
            rng_seed: 0,
        }
    }
}

impl PartialKnowledgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.knowledge_fraction > 0.0 && self.knowledge_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "knowledge fraction must lie in (0, 1], got {}",
                self.knowledge_fraction
            )));
        }
        if self.bootstrap_rounds == 0 {
            return Err(Error::InvalidConfig("bootstrap_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// The observer subsets 𝒮ₜ visible to the attacker.
///
/// Each target's observers are shuffled once from `seed` and the first
/// ⌊f·|𝒰ₜ|⌋ are kept, so for a fixed seed a larger fraction always sees a
/// superset of what a smaller one sees.
pub fn sample_known_workers(
    obs: &ObservationSet,
    targets: &[ItemId],
    knowledge_fraction: f64,
    seed: u64,
) -> Result<BTreeMap<ItemId, Vec<WorkerId>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut known = BTreeMap::new();
    for &t in targets {
        let mut workers: Vec<WorkerId> = obs.workers_of(t).collect();
        workers.shuffle(&mut rng);
        let keep = (knowledge_fraction * workers.len() as f64 + 1e-9).floor() as usize;
        workers.truncate(keep.min(workers.len()));
        if workers.is_empty() {
            return Err(Error::EmptyKnowledge(t));
        }
        workers.sort();
        known.insert(t, workers);
    }
    Ok(known)
}

/// Observations visible to the attacker: targets only, observers in 𝒮ₜ.
pub fn known_observations(
    obs: &ObservationSet,
    known_workers: &BTreeMap<ItemId, Vec<WorkerId>>,
) -> ObservationSet {
    obs.filter(|o| {
        known_workers
            .get(&o.item)
            .is_some_and(|ws| ws.binary_search(&o.worker).is_ok())
    })
}

/// Before-attack estimates for the targets from the known observations.
///
/// Alternates bootstrap value estimates (with the resample draws fixed per
/// target across iterations) and the model's reliability update until the
/// largest change of any estimate drops below the engine tolerance.
pub fn bootstrap_before_values(
    known: &ObservationSet,
    targets: &[ItemId],
    model: &ModelConfig,
    rounds: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    model.validate()?;
    let (work, norm): (Cow<'_, ObservationSet>, Normalization) = match model {
        ModelConfig::Gtm(cfg) if cfg.normalize => {
            let (z, n) = gtm_normalize(known)?;
            (Cow::Owned(z), n)
        }
        _ => (Cow::Borrowed(known), Normalization::default()),
    };
    let (mut rel, max_iterations, tolerance) = match model {
        ModelConfig::Crh(c) => (c.initial_weight.dense(known.num_workers()), c.max_iterations, c.tolerance),
        ModelConfig::Gtm(c) => (c.initial_variance.dense(known.num_workers()), c.max_iterations, c.tolerance),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(ItemId, Vec<WorkerId>, Vec<Vec<usize>>)> = targets
        .iter()
        .map(|&t| {
            let workers: Vec<WorkerId> = work.workers_of(t).collect();
            let idx = resample_indices(workers.len(), rounds, &mut rng);
            (t, workers, idx)
        })
        .collect();
    if let Some((t, _, _)) = draws.iter().find(|(_, ws, _)| ws.is_empty()) {
        return Err(Error::EmptyKnowledge(*t));
    }

    let mut raw: Option<Vec<Option<f64>>> = None;
    for _ in 0..max_iterations {
        let mut values = vec![None; work.num_items()];
        for (t, workers, idx) in &draws {
            let samples: Vec<WeightedSample> = workers
                .iter()
                .map(|&w| WeightedSample {
                    value: work.value(w, *t).expect("worker observes the target"),
                    reliability: rel[w.index()],
                })
                .collect();
            let mut sum = 0.0;
            for replicate in idx {
                sum += aggregate_indices(&samples, replicate, model, *t)?;
            }
            values[t.index()] = Some(sum / idx.len() as f64);
        }
        let next_raw = norm.denormalize(&values);
        let delta = raw.as_ref().map(|prev| max_abs_change(prev, &next_raw));
        raw = Some(next_raw);
        let updated = match model {
            ModelConfig::Crh(_) => crh_update_weights(&work, &values)?,
            ModelConfig::Gtm(cfg) => gtm_update_variances(&work, &values, cfg)?,
        };
        for (r, new) in rel.iter_mut().zip(updated) {
            if let Some(new) = new {
                *r = new;
            }
        }
        if delta.is_some_and(|d| d < tolerance) {
            break;
        }
    }
    Ok(raw.expect("at least one iteration runs"))
}

/// Optimizes malicious values while seeing only part of the normal data.
///
/// The attacker sees a fraction of each target's observers and nothing on
/// other items. Bounds are the range of the visible values, and the
/// before-attack values are bootstrap estimates (or, with
/// `use_bootstrap = false`, a plain engine run over the visible data).
pub fn run_partial_knowledge_attack(
    obs: &ObservationSet,
    plan: &AttackPlan,
    pk: &PartialKnowledgeConfig,
    model: &ModelConfig,
    ga: &GradientAscentConfig,
) -> Result<AttackOutcome> {
    pk.validate()?;
    model.validate()?;
    let known_workers = sample_known_workers(obs, &plan.targets, pk.knowledge_fraction, pk.rng_seed)?;
    let known = known_observations(obs, &known_workers);

    let mut visible = plan.clone();
    for &t in &plan.targets {
        let b = Bounds::of(known.item_observations(t).map(|o| o.value)).ok_or(Error::EmptyKnowledge(t))?;
        visible.bounds.insert(t, b);
    }

    let before = if pk.use_bootstrap {
        let boot_seed = pk.rng_seed ^ 0x9e37_79b9_7f4a_7c15;
        bootstrap_before_values(&known, &plan.targets, model, pk.bootstrap_rounds, boot_seed)?
    } else {
        model.run(&known)?.values
    };
    ascend(&known, &visible, model, &before, ga)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth_discovery::CrhConfig;
    use crate::types::Observation;

    fn obs() -> ObservationSet {
        ObservationSet::new((0..20u32).flat_map(|w| {
            (0..3u32).map(move |i| Observation::new(w, i, ((w * 13 + i * 7) % 17) as f64))
        }))
        .unwrap()
    }

    #[test]
    fn known_subsets_are_nested() {
        let o = obs();
        let t = [ItemId(0), ItemId(2)];
        let mut prev: Option<BTreeMap<ItemId, Vec<WorkerId>>> = None;
        for f in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let k = sample_known_workers(&o, &t, f, 11).unwrap();
            assert_eq!(k[&ItemId(0)].len(), (f * 20.0 + 1e-9).floor() as usize);
            if let Some(p) = &prev {
                for (item, ws) in p {
                    assert!(ws.iter().all(|w| k[item].contains(w)));
                }
            }
            prev = Some(k);
        }
    }

    #[test]
    fn empty_knowledge_is_an_error() {
        assert!(matches!(
            sample_known_workers(&obs(), &[ItemId(0)], 0.01, 0),
            Err(Error::EmptyKnowledge(ItemId(0)))
        ));
    }

    #[test]
    fn known_observations_cover_only_targets() {
        let o = obs();
        let k = sample_known_workers(&o, &[ItemId(1)], 0.5, 2).unwrap();
        let known = known_observations(&o, &k);
        assert_eq!(known.len(), 10);
        assert!(known.entries().iter().all(|e| e.item == ItemId(1)));
    }

    #[test]
    fn bootstrap_phase_is_close_to_direct_estimate() {
        let o = obs();
        let model = ModelConfig::Crh(CrhConfig::default());
        let direct = model.run(&o).unwrap();
        let boot = bootstrap_before_values(&o, &[ItemId(0), ItemId(1), ItemId(2)], &model, 400, 5).unwrap();
        for i in 0..3 {
            let (a, b) = (direct.values[i].unwrap(), boot[i].unwrap());
            assert!((a - b).abs() < 1.0, "item {i}: {a} vs {b}");
        }
    }
}
