//! Bootstrap estimate of one item's aggregate from a small weighted sample,
//! and how it settles as the number of rounds grows.
//!
//! ```text
//! cargo run --example bootstrap
//! ```

use crowdpoison::attack::{bootstrap_summary, WeightedSample};
use crowdpoison::truth_discovery::{CrhConfig, GtmConfig, ModelConfig};

fn main() -> crowdpoison::Result<()> {
    let samples: Vec<WeightedSample> = [(24.1, 2.3), (26.8, 1.1), (19.5, 0.4), (25.2, 3.0), (31.0, 0.2), (23.7, 1.8)]
        .into_iter()
        .map(|(value, reliability)| WeightedSample { value, reliability })
        .collect();

    for (name, model) in [
        ("crh (weights)", ModelConfig::Crh(CrhConfig::default())),
        ("gtm (variances)", ModelConfig::Gtm(GtmConfig::default())),
    ] {
        println!("{name}");
        println!("{:>8} {:>10} {:>10} {:>10}", "rounds", "estimate", "spread", "std err");
        for rounds in [10, 100, 500, 1000, 5000] {
            let s = bootstrap_summary(&samples, &model, rounds, 42)?;
            println!("{rounds:>8} {:>10.4} {:>10.4} {:>10.4}", s.estimate, s.spread, s.standard_error);
        }
        println!();
    }
    Ok(())
}
