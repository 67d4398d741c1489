mod common;

use common::{oracle_crh, oracle_gtm, random_obs_in, relative_error, rng};
use crowdpoison::truth_discovery::{
    crh_objective, crh_update_values, run_crh, run_gtm, CrhConfig, GtmConfig,
};
use crowdpoison::{ItemId, Observation, ObservationSet};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn item_range(obs: &ObservationSet, item: ItemId) -> (f64, f64) {
    obs.item_observations(item)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.value), hi.max(o.value)))
}

/// Relabels workers through a random permutation and shuffles row order.
fn permuted(obs: &ObservationSet, seed: u64) -> (ObservationSet, Vec<u32>) {
    let mut r = rng(seed);
    let mut perm: Vec<u32> = (0..obs.num_workers() as u32).collect();
    perm.shuffle(&mut r);
    let mut rows: Vec<Observation> = obs
        .entries()
        .iter()
        .map(|o| Observation::new(perm[o.worker.index()], o.item.0, o.value))
        .collect();
    rows.shuffle(&mut r);
    (ObservationSet::new(rows).unwrap(), perm)
}

#[test]
fn dense_fixture_matches_longhand_crh_and_gtm() {
    let x = [[21.0, 3.5, -7.0], [19.5, 4.0, -6.0], [30.0, 2.0, -9.5], [20.5, 3.75, -6.5]];
    let obs = common::dense_obs(&x);
    let (truth, weights) = oracle_crh(&x);
    let crh = run_crh(&obs, &CrhConfig::default()).unwrap();
    for i in 0..3 {
        assert!((crh.values[i].unwrap() - truth[i]).abs() < 1e-10);
    }
    for u in 0..4 {
        assert!((crh.reliability[u].unwrap() - weights[u]).abs() < 1e-10);
    }
    let (truth, variances) = oracle_gtm(&x);
    let gtm = run_gtm(&obs, &GtmConfig::default()).unwrap();
    for i in 0..3 {
        assert!((gtm.values[i].unwrap() - truth[i]).abs() < 1e-10);
    }
    for u in 0..4 {
        assert!((gtm.reliability[u].unwrap() - variances[u]).abs() < 1e-10);
    }
}

#[test]
fn noisy_worker_is_downweighted() {
    let x = [[10.0, 20.0], [10.2, 19.9], [9.9, 20.1], [16.0, 12.0]];
    let obs = common::dense_obs(&x);
    let crh = run_crh(&obs, &CrhConfig::default()).unwrap();
    let gtm = run_gtm(&obs, &GtmConfig::default()).unwrap();
    for u in 0..3 {
        assert!(crh.reliability[u] > crh.reliability[3]);
        assert!(gtm.reliability[u] < gtm.reliability[3]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_random_matrices_match_oracles(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut x = [[0.0; 3]; 5];
        for row in &mut x {
            for v in row.iter_mut() {
                *v = r.random_range(-100.0..100.0);
            }
        }
        let obs = common::dense_obs(&x);
        let (truth, _) = oracle_crh(&x);
        let crh = run_crh(&obs, &CrhConfig::default()).unwrap();
        let (gtruth, _) = oracle_gtm(&x);
        let gtm = run_gtm(&obs, &GtmConfig::default()).unwrap();
        for i in 0..3 {
            prop_assert!((crh.values[i].unwrap() - truth[i]).abs() < 1e-9);
            prop_assert!((gtm.values[i].unwrap() - gtruth[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn value_step_is_the_weighted_mean(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs_in(&mut r, 2..=15, 1..=10, 0.5);
        let w: Vec<f64> = (0..obs.num_workers()).map(|_| r.random_range(0.01..5.0)).collect();
        let values = crh_update_values(&obs, &w).unwrap();
        for i in 0..obs.num_items() {
            let item = ItemId(i as u32);
            let mut num = 0.0;
            let mut den = 0.0;
            for o in obs.item_observations(item) {
                num += w[o.worker.index()] * o.value;
                den += w[o.worker.index()];
            }
            prop_assert!(relative_error(values[i].unwrap(), num / den) < 1e-10);
        }
    }

    #[test]
    fn value_step_ignores_weight_scale(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let mut r = rng(seed);
        let obs = random_obs_in(&mut r, 2..=15, 1..=10, 0.5);
        let w: Vec<f64> = (0..obs.num_workers()).map(|_| r.random_range(0.01..5.0)).collect();
        let scaled: Vec<f64> = w.iter().map(|x| c * x).collect();
        let a = crh_update_values(&obs, &w).unwrap();
        let b = crh_update_values(&obs, &scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.unwrap(), y.unwrap());
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn aggregates_stay_within_observed_range(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs_in(&mut r, 2..=20, 1..=12, 0.4);
        let crh = run_crh(&obs, &CrhConfig::default()).unwrap();
        let gtm = run_gtm(&obs, &GtmConfig::default()).unwrap();
        for i in 0..obs.num_items() {
            let item = ItemId(i as u32);
            let (lo, hi) = item_range(&obs, item);
            let eps = 1e-9 * (hi - lo).abs().max(1.0);
            let c = crh.value(item).unwrap();
            prop_assert!(c >= lo - eps && c <= hi + eps);
            // The prior mean joins the range for GTM.
            let g = gtm.value(item).unwrap();
            prop_assert!(g >= lo.min(0.0) - eps && g <= hi.max(0.0) + eps);
        }
        prop_assert!(gtm.reliability.iter().flatten().all(|&v| v > 0.0));
    }

    #[test]
    fn worker_order_does_not_matter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs_in(&mut r, 2..=15, 1..=10, 0.5);
        let (shuffled, perm) = permuted(&obs, seed ^ 1);
        let a = run_crh(&obs, &CrhConfig::default()).unwrap();
        let b = run_crh(&shuffled, &CrhConfig::default()).unwrap();
        for i in 0..obs.num_items() {
            prop_assert!(relative_error(a.values[i].unwrap(), b.values[i].unwrap()) < 1e-8);
        }
        for u in 0..obs.num_workers() {
            let (wa, wb) = (a.reliability[u].unwrap(), b.reliability[perm[u] as usize].unwrap());
            prop_assert!((wa - wb).abs() < 1e-8 * wa.abs().max(1.0));
        }
    }

    #[test]
    fn crh_objective_never_increases(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs_in(&mut r, 3..=15, 2..=10, 0.6);
        let mut prev = f64::INFINITY;
        for k in 1..=12 {
            let state = run_crh(&obs, &CrhConfig { max_iterations: k, ..CrhConfig::default() }).unwrap();
            prop_assert!(state.reliability.iter().flatten().all(|&w| w >= 0.0));
            let f = crh_objective(&obs, &state);
            prop_assert!(f <= prev * (1.0 + 1e-12) + 1e-12, "round {k}: {f} after {prev}");
            prev = f;
        }
    }

    #[test]
    fn engines_are_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs_in(&mut r, 2..=15, 1..=10, 0.5);
        prop_assert_eq!(run_crh(&obs, &CrhConfig::default()).unwrap(), run_crh(&obs, &CrhConfig::default()).unwrap());
        prop_assert_eq!(run_gtm(&obs, &GtmConfig::default()).unwrap(), run_gtm(&obs, &GtmConfig::default()).unwrap());
    }
}
