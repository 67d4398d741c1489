//! Attacker knowledge against damage: the partial-knowledge attack at
//! several knowledge fractions, with and without bootstrap estimates.
//!
//! ```text
//! cargo run --release --example partial_knowledge_attack -- [trials]
//! ```

use crowdpoison::data::{generate_synthetic, SyntheticConfig};
use crowdpoison::experiment::{run_experiment_on, AttackKind, DatasetSpec, ExperimentConfig, PartialSettings};

fn main() -> crowdpoison::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let synth = SyntheticConfig::scaled();
    let (obs, _) = generate_synthetic(&synth)?;
    let fractions = vec![0.2, 0.4, 0.6, 0.8, 1.0];

    let run = |use_bootstrap: bool| {
        let cfg = ExperimentConfig {
            dataset: DatasetSpec::Synthetic(synth.clone()),
            attack: AttackKind::PartialKnowledge,
            attack_fractions: vec![0.2],
            knowledge_fractions: fractions.clone(),
            trials,
            partial: PartialSettings {
                bootstrap_rounds: 500,
                use_bootstrap,
            },
            ..ExperimentConfig::default()
        };
        run_experiment_on(&cfg, &obs)
    };
    let boot = run(true)?;
    let plain = run(false)?;

    println!("{:>10} {:>12} {:>12}", "knowledge", "bootstrap", "no-boot");
    for f in fractions {
        println!(
            "{f:>10.1} {:>12.4} {:>12.4}",
            boot.point(0.2, f).map_or(f64::NAN, |p| p.mean_error),
            plain.point(0.2, f).map_or(f64::NAN, |p| p.mean_error)
        );
    }
    Ok(())
}
