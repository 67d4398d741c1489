//! Maximum influence of estimation: scores every worker by how far the CRH
//! estimates move without them, removes the top share, and shows how many
//! of the removed workers were malicious.
//!
//! ```text
//! cargo run --release --example mie_defense
//! ```

use crowdpoison::attack::{build_attack_plan, maximum_attack};
use crowdpoison::data::{generate_synthetic, SyntheticConfig};
use crowdpoison::defense::{run_mie, MieConfig};
use crowdpoison::truth_discovery::{run_crh, CrhConfig};
use crowdpoison::average_estimation_error;

fn main() -> crowdpoison::Result<()> {
    let (obs, _) = generate_synthetic(&SyntheticConfig::scaled().with_seed(5))?;
    let before = run_crh(&obs, &CrhConfig::default())?;
    let plan = build_attack_plan(&obs, 0.2, 50, 1)?;
    let poisoned = maximum_attack(&plan).poison(&obs)?;
    let targets = || plan.targets.iter().copied();

    let crh = run_crh(&poisoned, &CrhConfig::default())?;
    println!("undefended crh: {:.4}", average_estimation_error(&before, &crh, targets())?.average_error);

    for assumed in [0.05, 0.1, 0.2] {
        let cfg = MieConfig {
            assumed_attack_fraction: assumed,
            ..MieConfig::default()
        };
        let out = run_mie(&poisoned, &cfg)?;
        let caught = out.removed.iter().filter(|(u, _)| plan.malicious_pool.contains(u)).count();
        println!(
            "mie, assumed {assumed}: {:.4}, removed {} workers ({caught} malicious), {} items left unestimated",
            average_estimation_error(&before, &out.state, targets())?.average_error,
            out.removed.len(),
            out.unestimable.len()
        );
    }

    let out = run_mie(&poisoned, &MieConfig::default())?;
    println!("\nmost influential workers:");
    for (u, phi) in out.removed.iter().take(5) {
        let tag = if plan.malicious_pool.contains(u) { "malicious" } else { "normal" };
        println!("  worker {:>4} influence {phi:>10.4} {tag}", u.0);
    }
    Ok(())
}
