//! Runs CRH and GTM on a synthetic dataset and checks both against the
//! ground truth the generator drew.
//!
//! ```text
//! cargo run --release --example truth_discovery
//! ```

use crowdpoison::data::{generate_synthetic, SyntheticConfig};
use crowdpoison::truth_discovery::{run_crh, run_gtm, CrhConfig, GtmConfig};
use crowdpoison::{AggregationState, WorkerId};

fn rmse(state: &AggregationState, truth: &[f64]) -> f64 {
    let (sum, n) = truth
        .iter()
        .enumerate()
        .filter_map(|(i, t)| state.values[i].map(|v| (v - t).powi(2)))
        .fold((0.0, 0), |(s, n), e| (s + e, n + 1));
    (sum / n as f64).sqrt()
}

fn main() -> crowdpoison::Result<()> {
    let (obs, truth) = generate_synthetic(&SyntheticConfig::scaled().with_seed(7))?;
    println!("{} workers, {} items, {} values", obs.num_workers(), obs.num_items(), obs.len());

    let crh = run_crh(&obs, &CrhConfig::default())?;
    let gtm = run_gtm(&obs, &GtmConfig::default())?;
    for (name, state) in [("crh", &crh), ("gtm", &gtm)] {
        println!(
            "{name}: {} iterations, converged {}, rmse vs truth {:.4}",
            state.iterations,
            state.converged,
            rmse(state, &truth.values)
        );
    }

    // Noisy workers should get small CRH weights and large GTM variances.
    let mut by_sigma: Vec<WorkerId> = obs.active_workers().collect();
    by_sigma.sort_by(|a, b| truth.sigma(*a).total_cmp(&truth.sigma(*b)));
    println!("\n{:>8} {:>8} {:>10} {:>12}", "worker", "sigma", "crh weight", "gtm variance");
    for &u in by_sigma.iter().step_by(by_sigma.len() / 8) {
        println!(
            "{:>8} {:>8.2} {:>10.4} {:>12.4}",
            u.0,
            truth.sigma(u),
            crh.reliability(u).unwrap_or(f64::NAN),
            gtm.reliability(u).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
