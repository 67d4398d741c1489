mod common;

use std::io::Write;

use common::{random_obs_in, rng};
use crowdpoison::data::{
    export_ground_truth, export_observations, generate_synthetic, load_dataset, load_ground_truth,
    load_observations, read_generic, write_observations, DatasetSummary, Schema, SyntheticConfig,
};
use crowdpoison::{ItemId, Observation, ObservationSet, WorkerId};
use proptest::prelude::*;

#[test]
fn default_synthetic_dataset_has_fifty_thousand_rows() {
    let (obs, truth) = generate_synthetic(&SyntheticConfig::default()).unwrap();
    assert_eq!(DatasetSummary::of(&obs), DatasetSummary { workers: 500, items: 4000, values: 50_000 });
    assert!(truth.values.iter().all(|v| (20.0..=30.0).contains(v)));
    assert!(truth.worker_sigmas.iter().all(|s| (0.0..=30.0).contains(s)));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    export_observations(&obs, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 50_001);
    assert!(!text.contains('\r'));
}

#[test]
fn worker_noise_matches_its_sigma() {
    // Two workers who rate all 10^4 items.
    let cfg = SyntheticConfig {
        num_workers: 2,
        num_items: 10_000,
        num_values: 20_000,
        sigma_low: 1.0,
        seed: 99,
        ..SyntheticConfig::default()
    };
    let (obs, truth) = generate_synthetic(&cfg).unwrap();
    for u in 0..2 {
        let worker = WorkerId(u);
        let res: Vec<f64> = obs.worker_observations(worker).map(|o| o.value - truth.value(o.item)).collect();
        let n = res.len() as f64;
        let mean = res.iter().sum::<f64>() / n;
        let sd = (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sigma = truth.sigma(worker);
        assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "mean {mean} sigma {sigma}");
        assert!((sd - sigma).abs() < 0.05 * sigma, "sd {sd} sigma {sigma}");
    }
}

#[test]
fn generation_is_seeded() {
    let cfg = SyntheticConfig::scaled().with_seed(4);
    assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
    assert_ne!(generate_synthetic(&cfg).unwrap().0, generate_synthetic(&cfg.with_seed(5)).unwrap().0);
}

#[test]
fn impossible_density_is_rejected() {
    let cfg = SyntheticConfig {
        num_workers: 3,
        num_items: 3,
        num_values: 10,
        ..SyntheticConfig::default()
    };
    assert!(generate_synthetic(&cfg).is_err());
}

#[test]
fn ground_truth_round_trips() {
    let (_, truth) = generate_synthetic(&SyntheticConfig::scaled()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (items, workers) = (dir.path().join("items.csv"), dir.path().join("workers.csv"));
    export_ground_truth(&truth, &items, &workers).unwrap();
    assert_eq!(load_ground_truth(&items, &workers).unwrap(), truth);
}

#[test]
fn adapters_read_files_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let emotion = dir.path().join("anger.standardized.tsv");
    let mut f = std::fs::File::create(&emotion).unwrap();
    writeln!(f, "!amt_annotation_ids\t!amt_worker_ids\torig_id\tanger").unwrap();
    for (k, (w, i, v)) in [("A", 1, 10), ("B", 1, 30), ("A", 2, -5)].iter().enumerate() {
        writeln!(f, "{k}\t{w}\t{i}\t{v}").unwrap();
    }
    drop(f);
    let ds = load_dataset(&emotion, Schema::Emotion).unwrap();
    assert_eq!(ds.observations.len(), 3);
    assert_eq!(ds.observations.value(WorkerId(1), ItemId(0)), Some(30.0));

    let weather = dir.path().join("weather.tsv");
    std::fs::write(&weather, "src1\tBoston\t07-01\t80\nsrc2\tBoston\t07-01\t82\nsrc1\tAustin\t07-01\t97\n").unwrap();
    let ds = load_dataset(&weather, Schema::Weather).unwrap();
    assert_eq!(ds.item_labels, vec!["Boston|07-01", "Austin|07-01"]);
    assert_eq!(ds.observations.observer_count(ItemId(0)), 2);
}

#[test]
fn header_only_and_empty_files_are_rejected() {
    assert!(read_generic("".as_bytes()).is_err());
    assert!(read_generic("worker_id,item_id,value\n".as_bytes()).is_err());
    assert!(read_generic("a,b,c\n0,0,1\n".as_bytes()).is_err());
}

fn arbitrary_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn export_then_load_is_identity(rows in prop::collection::btree_map((0u32..30, 0u32..30), arbitrary_value(), 1..200)) {
        let obs = ObservationSet::new(rows.iter().map(|(&(w, i), &v)| Observation::new(w, i, v))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        export_observations(&obs, &path).unwrap();
        let back = load_observations(&path, Schema::Generic).unwrap();
        prop_assert_eq!(back.len(), obs.len());
        for (a, b) in obs.entries().iter().zip(back.entries()) {
            prop_assert_eq!(a.worker, b.worker);
            prop_assert_eq!(a.item, b.item);
            prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }

    #[test]
    fn writer_output_parses_back(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs_in(&mut r, 1..=20, 1..=20, 0.3);
        let mut buf = Vec::new();
        write_observations(&obs, None, &mut buf).unwrap();
        prop_assert_eq!(read_generic(buf.as_slice()).unwrap().observations, obs);
    }
}
