//! Compares the random, maximum and full-knowledge attacks on a scaled
//! synthetic dataset, for both server models.
//!
//! ```text
//! cargo run --release --example attack_comparison -- [trials]
//! ```

use crowdpoison::data::{generate_synthetic, SyntheticConfig};
use crowdpoison::experiment::{run_experiment_on, AttackKind, DatasetSpec, ExperimentConfig};
use crowdpoison::ModelKind;

fn main() -> crowdpoison::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let synth = SyntheticConfig::scaled().with_seed(2024);
    let (obs, _) = generate_synthetic(&synth)?;

    for model in [ModelKind::Crh, ModelKind::Gtm] {
        println!("{model}:");
        println!("{:>8} {:>12} {:>12} {:>12}", "alpha", "random", "maximum", "full");
        let mut table = Vec::new();
        for attack in [AttackKind::Random, AttackKind::Maximum, AttackKind::FullKnowledge] {
            let cfg = ExperimentConfig {
                dataset: DatasetSpec::Synthetic(synth.clone()),
                model,
                attack,
                attack_fractions: vec![0.05, 0.1, 0.2, 0.3],
                num_targets: Some(50),
                trials,
                ..ExperimentConfig::default()
            };
            table.push(run_experiment_on(&cfg, &obs)?);
        }
        for (k, point) in table[0].aggregated.iter().enumerate() {
            println!(
                "{:>8.2} {:>12.4} {:>12.4} {:>12.4}",
                point.attack_fraction,
                table[0].aggregated[k].mean_error,
                table[1].aggregated[k].mean_error,
                table[2].aggregated[k].mean_error,
            );
        }
    }
    Ok(())
}
