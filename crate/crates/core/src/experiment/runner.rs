use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AttackKind, DefenseKind, ExperimentConfig};
use super::report::{SweepPoint, SweepResult, TrialFailure, TrialRow};
use crate::attack::{
    build_attack_plan, maximum_attack, random_attack, run_full_knowledge_attack, run_partial_knowledge_attack,
    AttackPlan, MaliciousValues,
};
use crate::defense::{run_mie, run_mwa};
use crate::error::{Error, Result};
use crate::metric::{average_estimation_error, EvaluationReport, RunDescriptor};
use crate::types::{AggregationState, ObservationSet, WorkerId};

/// Offsets mixed into the trial seed so the plan, the random baseline and
/// the partial-knowledge sampling draw from unrelated streams.
const RANDOM_ATTACK_STREAM: u64 = 0x5eed_0001;
const KNOWLEDGE_STREAM: u64 = 0x5eed_0002;

/// Malicious values for one plan.
pub fn execute_attack(
    cfg: &ExperimentConfig,
    obs: &ObservationSet,
    plan: &AttackPlan,
    knowledge_fraction: f64,
    seed: u64,
) -> Result<MaliciousValues> {
    match cfg.attack {
        AttackKind::None => Ok(MaliciousValues::new()),
        AttackKind::Random => Ok(random_attack(plan, seed ^ RANDOM_ATTACK_STREAM)),
        AttackKind::Maximum => Ok(maximum_attack(plan)),
        AttackKind::FullKnowledge => {
            Ok(run_full_knowledge_attack(obs, plan, &cfg.attacker_model(), &cfg.gradient_ascent)?.values)
        }
        AttackKind::PartialKnowledge => {
            let pk = cfg.partial_config(knowledge_fraction, seed ^ KNOWLEDGE_STREAM);
            Ok(run_partial_knowledge_attack(obs, plan, &pk, &cfg.attacker_model(), &cfg.gradient_ascent)?.values)
        }
    }
}

/// What the server ends up with after its defense.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefenseOutput {
    pub state: AggregationState,
    /// MIE's removed workers with their influence scores.
    pub removed: Vec<(WorkerId, f64)>,
}

/// The server's aggregation of possibly poisoned data under the configured
/// defense.
pub fn execute_defense(cfg: &ExperimentConfig, obs: &ObservationSet, attack_fraction: f64) -> Result<DefenseOutput> {
    match cfg.defense {
        DefenseKind::None => Ok(DefenseOutput {
            state: cfg.server_model().run(obs)?,
            removed: Vec::new(),
        }),
        DefenseKind::Mwa => Ok(DefenseOutput {
            state: run_mwa(obs, &cfg.mwa_config())?,
            removed: Vec::new(),
        }),
        DefenseKind::Mie => {
            let out = run_mie(obs, &cfg.mie_config(attack_fraction))?;
            Ok(DefenseOutput {
                state: out.state,
                removed: out.removed,
            })
        }
    }
}

/// Everything one trial produced.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutput {
    pub plan: AttackPlan,
    pub malicious: MaliciousValues,
    pub defense: DefenseOutput,
    pub report: EvaluationReport,
}

/// Plan, attack, defend and score one trial against the clean aggregation
/// `before`.
pub fn run_trial(
    cfg: &ExperimentConfig,
    obs: &ObservationSet,
    before: &AggregationState,
    attack_fraction: f64,
    knowledge_fraction: f64,
    seed: u64,
) -> Result<TrialOutput> {
    let plan = build_attack_plan(obs, attack_fraction, cfg.targets()?, seed)?;
    let malicious = execute_attack(cfg, obs, &plan, knowledge_fraction, seed)?;
    let poisoned = malicious.poison(obs)?;
    let defense = execute_defense(cfg, &poisoned, attack_fraction)?;
    let report = average_estimation_error(before, &defense.state, plan.targets.iter().copied())?.with_metadata(
        RunDescriptor {
            attack: cfg.attack.name().to_string(),
            defense: cfg.defense.name().to_string(),
            attack_fraction,
            knowledge_fraction,
            trial_seed: seed,
        },
    );
    Ok(TrialOutput {
        plan,
        malicious,
        defense,
        report,
    })
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Runs every sweep point and trial of `cfg` on `obs`.
///
/// Trial `k` uses seed `base_seed + k` at every sweep point, so the points
/// are paired. A failing trial is recorded and the sweep continues.
pub fn run_experiment_on(cfg: &ExperimentConfig, obs: &ObservationSet) -> Result<SweepResult> {
    cfg.validate()?;
    let before = cfg.server_model().run(obs)?;
    let mut jobs = Vec::new();
    for &a in &cfg.attack_fractions {
        for &f in &cfg.effective_knowledge_fractions() {
            for trial in 0..cfg.trials {
                jobs.push((a, f, trial));
            }
        }
    }
    let run = || -> Vec<(f64, f64, usize, Result<EvaluationReport>)> {
        jobs.par_iter()
            .map(|&(a, f, trial)| {
                let seed = cfg.base_seed.wrapping_add(trial as u64);
                let out = run_trial(cfg, obs, &before, a, f, seed).map(|t| t.report);
                (a, f, trial, out)
            })
            .collect()
    };
    let outcomes = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(run),
        None => run(),
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (a, f, trial, out) in outcomes {
        match out {
            Ok(report) => {
                let per_item: Vec<f64> = report.per_item_error.values().copied().collect();
                rows.push(TrialRow {
                    attack_fraction: a,
                    knowledge_fraction: f,
                    trial,
                    seed: report.metadata.trial_seed,
                    average_error: report.average_error,
                    error_std: sample_std(&per_item),
                });
            }
            Err(e) => {
                log::warn!("trial {trial} at attack fraction {a}, knowledge {f} failed: {e}");
                failures.push(TrialFailure {
                    attack_fraction: a,
                    knowledge_fraction: f,
                    trial,
                    message: e.to_string(),
                });
            }
        }
    }
    let aggregated = aggregate_rows(&rows);
    Ok(SweepResult {
        config: Some(cfg.clone()),
        rows,
        aggregated,
        failures,
    })
}

/// Mean and sample standard deviation of the trial errors at each sweep
/// point, in order of first appearance.
pub fn aggregate_rows(rows: &[TrialRow]) -> Vec<SweepPoint> {
    let mut points: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    for r in rows {
        match points
            .iter_mut()
            .find(|(a, f, _)| *a == r.attack_fraction && *f == r.knowledge_fraction)
        {
            Some(p) => p.2.push(r.average_error),
            None => points.push((r.attack_fraction, r.knowledge_fraction, vec![r.average_error])),
        }
    }
    points
        .into_iter()
        .map(|(a, f, errs)| SweepPoint {
            attack_fraction: a,
            knowledge_fraction: f,
            trials: errs.len(),
            mean_error: errs.iter().sum::<f64>() / errs.len() as f64,
            std_error: sample_std(&errs),
        })
        .collect()
}

/// Loads the configured dataset and runs the sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let obs = cfg.dataset.load()?;
    run_experiment_on(cfg, &obs)
}
