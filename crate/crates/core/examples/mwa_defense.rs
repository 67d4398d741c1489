//! Median of weighted averages against the maximum attack, for several
//! group counts.
//!
//! ```text
//! cargo run --release --example mwa_defense
//! ```

use crowdpoison::attack::{build_attack_plan, maximum_attack};
use crowdpoison::data::{generate_synthetic, SyntheticConfig};
use crowdpoison::defense::{run_mwa, MwaConfig};
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
    for groups in [1, 2, 3, 5, 8] {
        let state = run_mwa(&poisoned, &MwaConfig::with_groups(groups))?;
        println!(
            "mwa, {groups} groups: {:.4}",
            average_estimation_error(&before, &state, targets())?.average_error
        );
    }
    Ok(())
}
