use serde::{Deserialize, Serialize};

use super::aggregate::{attack_gradient, attack_loss, projected_step};
use super::plan::{AttackPlan, MaliciousValues};
use crate::error::{Error, Result};
use crate::truth_discovery::ModelConfig;
use crate::types::ObservationSet;

/// How the step size shrinks with the outer iteration `r` (1-based).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDecay {
    /// ηᵣ = η₀ / √r
    #[default]
    InverseSqrt,
    /// ηᵣ = η₀
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientAscentConfig {
    /// η₀ as a multiple of each target's bound range.
    pub initial_step: f64,
    pub decay: StepDecay,
    pub max_outer_iterations: usize,
    /// Stop once the relative change of the loss falls below this.
    pub loss_tolerance: f64,
    /// Starting offset from the before-attack value, as a fraction of the
    /// bound range, taken toward the farther bound.
    pub initial_offset: f64,
}

impl Default for GradientAscentConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            decay: StepDecay::InverseSqrt,
            max_outer_iterations: 50,
            loss_tolerance: 1e-4,
            initial_offset: 0.1,
        }
    }
}

impl GradientAscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "initial step must be positive, got {}",
                self.initial_step
            )));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidConfig("max_outer_iterations must be at least 1".into()));
        }
        if !(self.loss_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("loss tolerance must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_offset) {
            return Err(Error::InvalidConfig("initial offset must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// ηᵣ for a target whose bounds span `range`.
    pub fn step_size(&self, r: usize, range: f64) -> f64 {
        let eta0 = self.initial_step * range;
        match self.decay {
            StepDecay::InverseSqrt => eta0 / (r as f64).sqrt(),
            StepDecay::Constant => eta0,
        }
    }
}

/// Result of a gradient-ascent attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub values: MaliciousValues,
    /// Attack loss after each aggregation refresh.
    pub loss_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// Before-attack value moved `initial_offset` of the range toward the
/// farther bound (toward the maximum on ties), then clamped.
pub fn initial_values(
    plan: &AttackPlan,
    before: &[Option<f64>],
    ga: &GradientAscentConfig,
) -> Result<MaliciousValues> {
    let mut mal = MaliciousValues::new();
    for &t in &plan.targets {
        let attackers = plan.attackers(t);
        if attackers.is_empty() {
            continue;
        }
        let b = plan
            .bounds_of(t)
            .ok_or_else(|| Error::InvalidConfig(format!("item {t}: no bounds")))?;
        let x = before.get(t.index()).copied().flatten().ok_or(Error::MissingValue(t))?;
        let offset = ga.initial_offset * b.range();
        let start = if b.max - x >= x - b.min { x + offset } else { x - offset };
        for &w in attackers {
            mal.set(w, t, b.clamp(start));
        }
    }
    Ok(mal)
}

/// Projected gradient ascent on the attack loss.
///
/// Each outer iteration re-runs `model` on `known` plus the current
/// malicious values, records the loss against `before`, and moves every
/// malicious value one projected step along its gradient. The gradient is
/// divided by its largest absolute entry, so the steepest coordinate moves
/// exactly ηᵣ; the raw gradient scales with value² and stalls on wide or
/// crowded items.
pub(crate) fn ascend(
    known: &ObservationSet,
    plan: &AttackPlan,
    model: &ModelConfig,
    before: &[Option<f64>],
    ga: &GradientAscentConfig,
) -> Result<AttackOutcome> {
    ga.validate()?;
    let mut mal = initial_values(plan, before, ga)?;
    if mal.is_empty() {
        return Ok(AttackOutcome {
            values: mal,
            loss_trace: Vec::new(),
            outer_iterations: 0,
            converged: true,
        });
    }
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut outer = 0;
    for r in 1..=ga.max_outer_iterations {
        outer = r;
        let state = model.run(&mal.poison(known)?)?;
        let loss = attack_loss(before, &state.values, &plan.targets)?;
        log::trace!("outer iteration {r}: loss {loss:.6e}");
        if let Some(&prev) = trace.last() {
            let change = (loss - prev).abs();
            trace.push(loss);
            if change <= ga.loss_tolerance * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        } else {
            trace.push(loss);
        }
        let grads = mal
            .iter()
            .map(|(w, t, x)| Ok((w, t, x, attack_gradient(known, plan, model, &state, before, &mal, w, t)?)))
            .collect::<Result<Vec<_>>>()?;
        let scale = grads.iter().fold(0.0f64, |m, g| m.max(g.3.abs()));
        if scale == 0.0 {
            converged = true;
            break;
        }
        let mut next = mal.clone();
        for (w, t, x, g) in grads {
            let b = plan.bounds[&t];
            next.set(w, t, projected_step(x, g / scale, ga.step_size(r, b.range()), b));
        }
        mal = next;
    }
    Ok(AttackOutcome {
        values: mal,
        loss_trace: trace,
        outer_iterations: outer,
        converged,
    })
}

/// Optimizes malicious values with complete knowledge of the normal data.
///
/// `model` is the attacker's simulation of the server, including its
/// initial reliabilities. The before-attack values come from running it on
/// the clean observations.
pub fn run_full_knowledge_attack(
    obs: &ObservationSet,
    plan: &AttackPlan,
    model: &ModelConfig,
    ga: &GradientAscentConfig,
) -> Result<AttackOutcome> {
    model.validate()?;
    let before = model.run(obs)?;
    ascend(obs, plan, model, &before.values, ga)
}
