use super::plan::{AttackPlan, Bounds, MaliciousValues};
use crate::error::{Error, Result};
use crate::metric::squared_distance;
use crate::truth_discovery::{posterior_mean, weight_sum_and_mean, GtmConfig, ModelConfig};
use crate::types::{AggregationState, ItemId, ObservationSet, WorkerId};

fn reliability_at(rel: &[f64], worker: WorkerId) -> Result<f64> {
    rel.get(worker.index()).copied().ok_or(Error::UnknownWorker(worker))
}

/// Weighted mean of `item` over its normal observers and its attackers.
///
/// `weights` is indexed by worker id and must cover the malicious ids too.
pub fn attacked_aggregate_crh(
    obs: &ObservationSet,
    mal: &MaliciousValues,
    weights: &[f64],
    item: ItemId,
) -> Result<f64> {
    let mut pairs = Vec::with_capacity(obs.observer_count(item) + 4);
    for o in obs.item_observations(item) {
        pairs.push((reliability_at(weights, o.worker)?, o.value));
    }
    for (w, x) in mal.on_item(item) {
        pairs.push((reliability_at(weights, w)?, x));
    }
    if pairs.is_empty() {
        return Err(Error::MissingValue(item));
    }
    weight_sum_and_mean(pairs.into_iter())
        .1
        .ok_or(Error::DegenerateItem(item))
}

/// Posterior mean of `item` over its normal observers and its attackers,
/// with the prior from `cfg`. Values are taken as given (no z-scoring).
pub fn attacked_aggregate_gtm(
    obs: &ObservationSet,
    mal: &MaliciousValues,
    variances: &[f64],
    cfg: &GtmConfig,
    item: ItemId,
) -> Result<f64> {
    let mut pairs = Vec::with_capacity(obs.observer_count(item) + 4);
    let mut push = |worker: WorkerId, x: f64| -> Result<()> {
        let var = reliability_at(variances, worker)?;
        if !(var > 0.0) {
            return Err(Error::NonPositiveVariance { worker, variance: var });
        }
        pairs.push((1.0 / var, x));
        Ok(())
    };
    for o in obs.item_observations(item) {
        push(o.worker, o.value)?;
    }
    for (w, x) in mal.on_item(item) {
        push(w, x)?;
    }
    Ok(posterior_mean(cfg, pairs.into_iter()))
}

/// Σₜ d(x̂ₜ, xₜ) over the targets, both vectors indexed by item id.
pub fn attack_loss(before: &[Option<f64>], after: &[Option<f64>], targets: &[ItemId]) -> Result<f64> {
    targets.iter().try_fold(0.0, |acc, &t| {
        let b = before.get(t.index()).copied().flatten().ok_or(Error::MissingValue(t))?;
        let a = after.get(t.index()).copied().flatten().ok_or(Error::MissingValue(t))?;
        Ok(acc + squared_distance(a, b))
    })
}

/// ∂x̂ₜ/∂xₜᵛ with the reliabilities of `state` held fixed.
fn aggregate_partial(
    obs: &ObservationSet,
    mal: &MaliciousValues,
    model: &ModelConfig,
    state: &AggregationState,
    attacker: WorkerId,
    item: ItemId,
) -> Result<f64> {
    let rel = |w: WorkerId| state.reliability(w).ok_or(Error::UnknownWorker(w));
    let observers = obs
        .workers_of(item)
        .chain(mal.on_item(item).map(|(w, _)| w));
    match model {
        ModelConfig::Crh(_) => {
            let (mut total, mut n, mut all_zero) = (0.0, 0usize, true);
            for w in observers {
                let r = rel(w)?;
                total += r;
                n += 1;
                all_zero &= r == 0.0;
            }
            match (total != 0.0, all_zero) {
                (true, _) => Ok(rel(attacker)? / total),
                // Matches the unweighted fallback of the value step.
                (false, true) => Ok(1.0 / n as f64),
                (false, false) => Err(Error::DegenerateItem(item)),
            }
        }
        ModelConfig::Gtm(cfg) => {
            let mut precision = 1.0 / cfg.sigma0_sq;
            for w in observers {
                precision += 1.0 / rel(w)?;
            }
            Ok(1.0 / (rel(attacker)? * precision))
        }
    }
}

/// Gradient of the attack loss with respect to one malicious value.
///
/// `state` is the aggregation over normal plus malicious observations;
/// `before` holds the pre-attack values indexed by item id. Only the
/// attacker's own target contributes, since other items do not depend on
/// this value once reliabilities are fixed.
pub fn attack_gradient(
    obs: &ObservationSet,
    plan: &AttackPlan,
    model: &ModelConfig,
    state: &AggregationState,
    before: &[Option<f64>],
    mal: &MaliciousValues,
    attacker: WorkerId,
    item: ItemId,
) -> Result<f64> {
    if !plan.is_assigned(attacker, item) {
        return Err(Error::NotAssigned {
            worker: attacker,
            item,
        });
    }
    let after = state.value(item).ok_or(Error::MissingValue(item))?;
    let before = before.get(item.index()).copied().flatten().ok_or(Error::MissingValue(item))?;
    let residual = after - before;
    if residual == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * residual * aggregate_partial(obs, mal, model, state, attacker, item)?)
}

/// One projected ascent step: clamp(x + η·g) to the bounds.
#[inline]
pub fn projected_step(value: f64, gradient: f64, eta: f64, bounds: Bounds) -> f64 {
    bounds.clamp(value + eta * gradient)
}
