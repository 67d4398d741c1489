use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plan::{AttackPlan, MaliciousValues};

/// Each attacker reports a value drawn uniformly from its target's bounds.
pub fn random_attack(plan: &AttackPlan, seed: u64) -> MaliciousValues {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MaliciousValues::from_plan(plan, |_, t| {
        let b = plan.bounds[&t];
        if b.max > b.min {
            rng.random_range(b.min..=b.max)
        } else {
            b.min
        }
    })
}

/// Each attacker reports the largest value any normal worker gave its target.
pub fn maximum_attack(plan: &AttackPlan) -> MaliciousValues {
    MaliciousValues::from_plan(plan, |_, t| plan.bounds[&t].max)
}
