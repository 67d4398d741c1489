//! One full-knowledge attack against CRH, next to the maximum baseline on
//! the same plan.
//!
//! ```text
//! cargo run --release --example full_knowledge_attack -- [attack_fraction]
//! ```

use crowdpoison::attack::{build_attack_plan, maximum_attack, run_full_knowledge_attack, GradientAscentConfig};
use crowdpoison::data::{generate_synthetic, SyntheticConfig};
use crowdpoison::truth_discovery::{CrhConfig, ModelConfig};
use crowdpoison::average_estimation_error;

fn main() -> crowdpoison::Result<()> {
    let alpha: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let (obs, _) = generate_synthetic(&SyntheticConfig::scaled().with_seed(3))?;
    let model = ModelConfig::Crh(CrhConfig::default());
    let plan = build_attack_plan(&obs, alpha, 50, 11)?;
    println!(
        "alpha {alpha}: {} malicious workers, {} (worker, target) assignments",
        plan.malicious_pool.len(),
        plan.num_assignments()
    );

    let before = model.run(&obs)?;
    let targets = || plan.targets.iter().copied();

    let maximum = maximum_attack(&plan);
    let after = model.run(&maximum.poison(&obs)?)?;
    println!("maximum:        {:.4}", average_estimation_error(&before, &after, targets())?.average_error);

    let outcome = run_full_knowledge_attack(&obs, &plan, &model, &GradientAscentConfig::default())?;
    let after = model.run(&outcome.values.poison(&obs)?)?;
    println!(
        "full knowledge: {:.4} after {} outer iterations (converged {})",
        average_estimation_error(&before, &after, targets())?.average_error,
        outcome.outer_iterations,
        outcome.converged
    );
    println!("loss trace:");
    for (r, loss) in outcome.loss_trace.iter().enumerate() {
        println!("  {:>3} {loss:.4}", r + 1);
    }
    assert!(outcome.values.within_bounds(&plan));
    Ok(())
}
