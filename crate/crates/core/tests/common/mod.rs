//! Independent oracles and random fixtures shared by the integration tests.
//!
//! Nothing here calls into the library's aggregation code: the oracles are
//! written against dense arrays so they can be checked by eye.

#![allow(dead_code)]

use std::collections::BTreeMap;

use crowdpoison::attack::{AttackPlan, Bounds, MaliciousValues};
use crowdpoison::{AggregationState, ItemId, ModelKind, Observation, ObservationSet, WorkerId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fully observed fixture: `x[u][i]` is worker u's value on item i.
pub fn dense_obs<const W: usize, const I: usize>(x: &[[f64; I]; W]) -> ObservationSet {
    ObservationSet::new(
        (0..W).flat_map(|u| (0..I).map(move |i| Observation::new(u as u32, i as u32, x[u][i]))),
    )
    .unwrap()
}

/// CRH written out longhand for a fully observed matrix: unit starting
/// weights, weighted means, log-ratio weights with a 1e-12 distance floor,
/// stop when no aggregate moves by 1e-6 or more.
pub fn oracle_crh<const W: usize, const I: usize>(x: &[[f64; I]; W]) -> ([f64; I], [f64; W]) {
    let mut w = [1.0; W];
    let mut truth = [0.0; I];
    for iter in 0..100 {
        let mut next = [0.0; I];
        for i in 0..I {
            let mut num = 0.0;
            let mut den = 0.0;
            for u in 0..W {
                num += w[u] * x[u][i];
                den += w[u];
            }
            next[i] = num / den;
        }
        let mut delta = 0.0f64;
        for i in 0..I {
            delta = delta.max((next[i] - truth[i]).abs());
        }
        truth = next;
        let mut dist = [0.0; W];
        for u in 0..W {
            for i in 0..I {
                dist[u] += (x[u][i] - truth[i]) * (x[u][i] - truth[i]);
            }
        }
        let total: f64 = dist.iter().sum();
        if total == 0.0 {
            break;
        }
        for u in 0..W {
            w[u] = (total / dist[u].max(1e-12)).ln();
        }
        if iter > 0 && delta < 1e-6 {
            break;
        }
    }
    (truth, w)
}

/// GTM written out longhand: per-item z-scores with the sample standard
/// deviation, prior N(0, 1), α = β = 1, unit starting variances; the
/// convergence check is on the de-normalized aggregates.
pub fn oracle_gtm<const W: usize, const I: usize>(x: &[[f64; I]; W]) -> ([f64; I], [f64; W]) {
    let (mu0, s0, alpha, beta) = (0.0, 1.0, 1.0, 1.0);
    let mut mean = [0.0; I];
    let mut sd = [0.0; I];
    let mut z = [[0.0; I]; W];
    for i in 0..I {
        mean[i] = (0..W).map(|u| x[u][i]).sum::<f64>() / W as f64;
        let ss: f64 = (0..W).map(|u| (x[u][i] - mean[i]).powi(2)).sum();
        sd[i] = (ss / (W - 1) as f64).sqrt();
        for u in 0..W {
            z[u][i] = if sd[i] > 0.0 { (x[u][i] - mean[i]) / sd[i] } else { x[u][i] };
        }
    }
    let mut var = [1.0; W];
    let mut raw = [0.0; I];
    for iter in 0..100 {
        let mut zt = [0.0; I];
        let mut next = [0.0; I];
        for i in 0..I {
            let mut num = mu0 / s0;
            let mut den = 1.0 / s0;
            for u in 0..W {
                num += z[u][i] / var[u];
                den += 1.0 / var[u];
            }
            zt[i] = num / den;
            next[i] = if sd[i] > 0.0 { mean[i] + sd[i] * zt[i] } else { zt[i] };
        }
        let mut delta = 0.0f64;
        for i in 0..I {
            delta = delta.max((next[i] - raw[i]).abs());
        }
        raw = next;
        for u in 0..W {
            let mut r = 0.0;
            for i in 0..I {
                r += (z[u][i] - zt[i]).powi(2);
            }
            var[u] = (2.0 * beta + r) / (2.0 * (alpha + 1.0) + I as f64);
        }
        if iter > 0 && delta < 1e-6 {
            break;
        }
    }
    (raw, var)
}

/// Random sparse observation set where every worker and every item has at
/// least one observation.
pub fn random_obs(r: &mut impl Rng, workers: usize, items: usize, density: f64) -> ObservationSet {
    let mut rows = Vec::new();
    let mut rated = vec![false; items];
    for u in 0..workers {
        let forced = r.random_range(0..items);
        for i in 0..items {
            if i == forced || r.random_bool(density) {
                rows.push(Observation::new(u as u32, i as u32, r.random_range(-50.0..50.0)));
                rated[i] = true;
            }
        }
    }
    for (i, seen) in rated.iter().enumerate() {
        if !seen {
            let u = r.random_range(0..workers);
            rows.push(Observation::new(u as u32, i as u32, r.random_range(-50.0..50.0)));
        }
    }
    ObservationSet::new(rows).unwrap()
}

/// [`random_obs`] with worker and item counts drawn from the given ranges.
pub fn random_obs_in(
    r: &mut impl Rng,
    workers: std::ops::RangeInclusive<usize>,
    items: std::ops::RangeInclusive<usize>,
    density: f64,
) -> ObservationSet {
    let (w, i) = (r.random_range(workers), r.random_range(items));
    random_obs(r, w, i, density)
}

/// A hand-built attack scenario with fixed reliabilities.
pub struct GradientFixture {
    pub obs: ObservationSet,
    pub plan: AttackPlan,
    pub mal: MaliciousValues,
    /// CRH weights or GTM variances, indexed by worker id, attackers included.
    pub reliability: Vec<f64>,
    pub before: Vec<Option<f64>>,
}

pub fn gradient_fixture(r: &mut impl Rng, model: ModelKind) -> GradientFixture {
    let n = r.random_range(5..=20);
    let targets = r.random_range(1..=5);
    let items = targets + r.random_range(0..=3);
    let obs = random_obs(r, n, items, 0.7);
    let pool = r.random_range(1..=4);
    let malicious_pool: Vec<WorkerId> = (0..pool).map(|k| WorkerId((n + k) as u32)).collect();
    let target_ids: Vec<ItemId> = (0..targets as u32).map(ItemId).collect();
    let mut per_item = BTreeMap::new();
    let mut bounds = BTreeMap::new();
    let mut mal = MaliciousValues::new();
    for &t in &target_ids {
        let mut attackers: Vec<WorkerId> = malicious_pool.iter().copied().filter(|_| r.random_bool(0.6)).collect();
        if attackers.is_empty() {
            attackers.push(malicious_pool[r.random_range(0..pool)]);
        }
        let b = Bounds::of(obs.item_observations(t).map(|o| o.value)).unwrap();
        for &a in &attackers {
            let x = if b.range() > 0.0 { r.random_range(b.min..=b.max) } else { b.min };
            mal.set(a, t, x);
        }
        per_item.insert(t, attackers);
        bounds.insert(t, b);
    }
    let reliability: Vec<f64> = (0..n + pool)
        .map(|_| match model {
            ModelKind::Crh => r.random_range(0.1..3.0),
            ModelKind::Gtm => r.random_range(0.2..5.0),
        })
        .collect();
    let before = (0..items)
        .map(|i| {
            let m = obs.item_observations(ItemId(i as u32)).map(|o| o.value).sum::<f64>()
                / obs.observer_count(ItemId(i as u32)) as f64;
            Some(m + r.random_range(-10.0..10.0))
        })
        .collect();
    let plan = AttackPlan {
        attack_fraction: 0.2,
        targets: target_ids,
        malicious_pool,
        per_item_attackers: per_item,
        bounds,
        rng_seed: 0,
    };
    GradientFixture {
        obs,
        plan,
        mal,
        reliability,
        before,
    }
}

/// Aggregate of one item with fixed reliabilities, attackers included:
/// weighted mean (CRH) or posterior mean under N(0, σ0²) (GTM).
pub fn oracle_aggregate(
    f: &GradientFixture,
    mal: &MaliciousValues,
    model: ModelKind,
    sigma0_sq: f64,
    item: ItemId,
) -> f64 {
    let pairs: Vec<(f64, f64)> = f
        .obs
        .item_observations(item)
        .map(|o| (f.reliability[o.worker.index()], o.value))
        .chain(mal.on_item(item).map(|(w, x)| (f.reliability[w.index()], x)))
        .collect();
    match model {
        ModelKind::Crh => {
            pairs.iter().map(|(w, x)| w * x).sum::<f64>() / pairs.iter().map(|(w, _)| w).sum::<f64>()
        }
        ModelKind::Gtm => {
            let num: f64 = pairs.iter().map(|(v, x)| x / v).sum();
            let den: f64 = 1.0 / sigma0_sq + pairs.iter().map(|(v, _)| 1.0 / v).sum::<f64>();
            num / den
        }
    }
}

/// Σₜ (x̂ₜ − beforeₜ)² with the fixture's reliabilities held fixed.
pub fn oracle_loss(f: &GradientFixture, mal: &MaliciousValues, model: ModelKind, sigma0_sq: f64) -> f64 {
    f.plan
        .targets
        .iter()
        .map(|&t| {
            let d = oracle_aggregate(f, mal, model, sigma0_sq, t) - f.before[t.index()].unwrap();
            d * d
        })
        .sum()
}

/// The aggregation state the gradient expects: fixture reliabilities and
/// the aggregates they induce.
pub fn fixture_state(f: &GradientFixture, model: ModelKind, sigma0_sq: f64) -> AggregationState {
    let values = (0..f.obs.num_items())
        .map(|i| Some(oracle_aggregate(f, &f.mal, model, sigma0_sq, ItemId(i as u32))))
        .collect();
    AggregationState {
        model,
        values,
        reliability: f.reliability.iter().map(|&r| Some(r)).collect(),
        iterations: 1,
        converged: true,
    }
}

/// Central difference of [`oracle_loss`] in one malicious value.
pub fn finite_difference(
    f: &GradientFixture,
    model: ModelKind,
    sigma0_sq: f64,
    worker: WorkerId,
    item: ItemId,
) -> f64 {
    let x = f.mal.get(worker, item).unwrap();
    let h = 1e-5 * f.plan.bounds[&item].range().max(1.0);
    let mut up = f.mal.clone();
    up.set(worker, item, x + h);
    let mut down = f.mal.clone();
    down.set(worker, item, x - h);
    (oracle_loss(f, &up, model, sigma0_sq) - oracle_loss(f, &down, model, sigma0_sq)) / (2.0 * h)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Every subset of `0..n` as a bitmask, grouped by size.
pub fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = u32> {
    (0u32..(1 << n)).filter(move |m| m.count_ones() as usize == k)
}
