//! Generates a dataset, writes it and its ground truth to disk, and reads
//! everything back.
//!
//! ```text
//! cargo run --example data_io -- [output_dir]
//! ```

use std::path::PathBuf;

use crowdpoison::attack::{build_attack_plan, random_attack};
use crowdpoison::data::{
    export_ground_truth, export_observations, export_poisoned, generate_synthetic, load_dataset,
    load_ground_truth, load_observations, DatasetSummary, Schema, SyntheticConfig,
};

fn main() -> crowdpoison::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("crowdpoison-data"));
    std::fs::create_dir_all(&dir)?;

    let (obs, truth) = generate_synthetic(&SyntheticConfig::scaled().with_seed(9))?;
    let obs_path = dir.join("observations.csv");
    export_observations(&obs, &obs_path)?;
    export_ground_truth(&truth, dir.join("truth_items.csv"), dir.join("truth_workers.csv"))?;

    let reloaded = load_observations(&obs_path, Schema::Generic)?;
    assert_eq!(reloaded, obs);
    assert_eq!(load_ground_truth(dir.join("truth_items.csv"), dir.join("truth_workers.csv"))?, truth);
    println!("{}: {}", obs_path.display(), DatasetSummary::of(&reloaded));

    // Poisoned files carry an is_malicious column that survives the trip.
    let plan = build_attack_plan(&obs, 0.1, 20, 4)?;
    let mal = random_attack(&plan, 4);
    let poisoned_path = dir.join("poisoned.csv");
    export_poisoned(&obs, &mal, &poisoned_path)?;
    let ds = load_dataset(&poisoned_path, Schema::Generic)?;
    assert_eq!(ds.observations, mal.poison(&obs)?);
    println!(
        "{}: {} flagged workers, {} malicious values",
        poisoned_path.display(),
        ds.malicious_workers.len(),
        mal.len()
    );
    Ok(())
}
