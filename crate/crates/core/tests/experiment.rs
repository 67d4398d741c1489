mod common;

use std::collections::BTreeMap;

use common::rng;
use crowdpoison::data::SyntheticConfig;
use crowdpoison::experiment::{
    aggregate_rows, from_json, read_csv, run_experiment, to_json, write_csv, AttackKind, DatasetSpec, DefenseKind,
    ExperimentConfig, SweepResult, TrialRow,
};
use crowdpoison::{average_estimation_error, AggregationState, ItemId, ModelKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn small(attack: AttackKind, defense: DefenseKind) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synthetic(SyntheticConfig {
            num_workers: 50,
            num_items: 80,
            num_values: 1200,
            seed: 3,
            ..SyntheticConfig::default()
        }),
        attack,
        defense,
        attack_fractions: vec![0.1, 0.3],
        num_targets: Some(6),
        trials: 4,
        ..ExperimentConfig::default()
    }
}

fn csv_text(r: &SweepResult) -> String {
    let mut buf = Vec::new();
    write_csv(r, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

#[test]
fn no_attack_means_zero_error() {
    for defense in [DefenseKind::None, DefenseKind::Mwa, DefenseKind::Mie] {
        let r = run_experiment(&small(AttackKind::None, defense)).unwrap();
        assert!(r.is_complete());
        if defense == DefenseKind::None {
            assert!(r.rows.iter().all(|row| row.average_error == 0.0));
        }
    }
}

#[test]
fn replay_is_byte_identical() {
    for (attack, defense) in [
        (AttackKind::Random, DefenseKind::Mie),
        (AttackKind::FullKnowledge, DefenseKind::None),
        (AttackKind::PartialKnowledge, DefenseKind::Mwa),
    ] {
        let mut cfg = small(attack, defense);
        cfg.knowledge_fractions = vec![0.5, 1.0];
        cfg.partial.bootstrap_rounds = 40;
        cfg.gradient_ascent.max_outer_iterations = 6;
        let first = run_experiment(&cfg).unwrap();
        let reloaded = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(reloaded, cfg);
        let second = run_experiment(&reloaded).unwrap();
        assert_eq!(to_json(&first).unwrap(), to_json(&second).unwrap());
        assert_eq!(csv_text(&first), csv_text(&second));
    }
}

#[test]
fn aggregates_are_recomputable_from_rows() {
    let r = run_experiment(&small(AttackKind::Maximum, DefenseKind::Mwa)).unwrap();
    assert_eq!(r.rows.len(), 8);
    for p in &r.aggregated {
        let errs: Vec<f64> = r
            .rows
            .iter()
            .filter(|row| row.attack_fraction == p.attack_fraction)
            .map(|row| row.average_error)
            .collect();
        assert_eq!(errs.len(), p.trials);
        assert!((p.mean_error - errs.iter().sum::<f64>() / errs.len() as f64).abs() < 1e-9);
        assert!((p.std_error - sample_std(&errs)).abs() < 1e-9);
    }
}

#[test]
fn trial_seeds_are_base_plus_index() {
    let mut cfg = small(AttackKind::Random, DefenseKind::None);
    cfg.base_seed = 100;
    let r = run_experiment(&cfg).unwrap();
    assert!(r.rows.iter().all(|row| row.seed == 100 + row.trial as u64));
}

#[test]
fn single_trial_csv_has_one_row_of_each_kind() {
    let cfg = ExperimentConfig {
        attack_fractions: vec![0.2],
        trials: 1,
        ..small(AttackKind::Maximum, DefenseKind::None)
    };
    let text = csv_text(&run_experiment(&cfg).unwrap());
    let kinds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(kinds, vec!["trial", "aggregate"]);
}

#[test]
fn csv_json_csv_round_trip() {
    let r = run_experiment(&small(AttackKind::Random, DefenseKind::Mwa)).unwrap();
    let via_csv = read_csv(csv_text(&r).as_bytes()).unwrap();
    let via_json = from_json(&to_json(&via_csv).unwrap()).unwrap();
    assert_eq!(csv_text(&via_json), csv_text(&r));
    assert_eq!(via_json.rows, r.rows);
    assert_eq!(via_json.aggregated, r.aggregated);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = small(AttackKind::Random, DefenseKind::None);
    for bad in [
        ExperimentConfig { trials: 0, ..base.clone() },
        ExperimentConfig { attack_fractions: vec![0.6], ..base.clone() },
        ExperimentConfig { attack_fractions: vec![], ..base.clone() },
        ExperimentConfig { knowledge_fractions: vec![0.0], ..base.clone() },
        ExperimentConfig { jobs: Some(0), ..base.clone() },
    ] {
        assert!(run_experiment(&bad).is_err());
    }
    assert!(ExperimentConfig::from_toml_str("trials = 3\nunknown_key = 1\n").is_err());
}

fn state(values: &[f64]) -> AggregationState {
    AggregationState {
        model: ModelKind::Crh,
        values: values.iter().copied().map(Some).collect(),
        reliability: vec![],
        iterations: 1,
        converged: true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn row_order_does_not_change_aggregates(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rows: Vec<TrialRow> = (0..r.random_range(1..40))
            .map(|k| TrialRow {
                attack_fraction: [0.1, 0.2, 0.3][k % 3],
                knowledge_fraction: 1.0,
                trial: k / 3,
                seed: (k / 3) as u64,
                average_error: r.random_range(0.0..100.0),
                error_std: 0.0,
            })
            .collect();
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut r);
        let key = |p: &crowdpoison::experiment::SweepPoint| (p.attack_fraction.to_bits(), p.knowledge_fraction.to_bits());
        let a: BTreeMap<_, _> = aggregate_rows(&rows).into_iter().map(|p| (key(&p), p)).collect();
        let b: BTreeMap<_, _> = aggregate_rows(&shuffled).into_iter().map(|p| (key(&p), p)).collect();
        prop_assert_eq!(a.len(), b.len());
        for (k, p) in &a {
            let q = &b[k];
            prop_assert_eq!(p.trials, q.trials);
            prop_assert!((p.mean_error - q.mean_error).abs() < 1e-9);
            prop_assert!((p.std_error - q.std_error).abs() < 1e-9);
        }
    }

    #[test]
    fn error_metric_invariants(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..20);
        let before: Vec<f64> = (0..n).map(|_| r.random_range(-50.0..50.0)).collect();
        let mut after = before.clone();
        let mut targets: Vec<ItemId> = (0..n as u32).filter(|_| r.random_bool(0.6)).map(ItemId).collect();
        if targets.is_empty() {
            targets.push(ItemId(0));
        }
        let (b, same) = (state(&before), state(&after));
        prop_assert_eq!(average_estimation_error(&b, &same, targets.clone()).unwrap().average_error, 0.0);
        for v in after.iter_mut() {
            if r.random_bool(0.5) {
                *v += r.random_range(-5.0..5.0);
            }
        }
        let a = state(&after);
        let forward = average_estimation_error(&b, &a, targets.clone()).unwrap();
        let backward = average_estimation_error(&a, &b, targets.clone()).unwrap();
        prop_assert_eq!(forward.average_error, backward.average_error);
        let mut reversed = targets.clone();
        reversed.reverse();
        prop_assert_eq!(average_estimation_error(&b, &a, reversed).unwrap(), forward.clone());
        let moved = targets.iter().any(|t| before[t.index()] != after[t.index()]);
        prop_assert_eq!(forward.average_error > 0.0, moved);
    }
}
