//! The bandit environment and the experiment protocols built on it.
//!
//! [`run_personalization`] is the learning loop: each step offers a random
//! subset of the available actions, the agent picks one by Thompson sampling,
//! the environment returns a noisy reward and the agent updates.
//! [`run_generalization`] repeats the loop with the agent frozen.

mod campaign;
mod experiments;

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::agents::{env_success_probability, Agent};
use crate::domain::{RunMetrics, ValueScores};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use campaign::{
    derive_seed, run_campaign, summarize, Campaign, CorruptionPlan, Job, Phase, RunRow, RunTask, SummaryRow,
    BinnedRow, CampaignResults, METRICS,
};
pub use experiments::{
    episode_for, experiments_stream, run_synthetic_experiment, run_value_experiment, SyntheticSetup, ValueRecord, ENV_STREAM, EPISODE_STREAM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// `Normal(score, reward_noise_sd²)`.
    Gaussian,
    /// `Bernoulli(sigmoid(standardized score))`.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig<F> {
    pub max_steps: usize,
    pub subset_size: usize,
    pub reward_noise_sd: F,
    pub convergence_streak: usize,
    pub reward_mode: RewardMode,
    /// End the loop as soon as the convergence streak completes.
    pub stop_at_convergence: bool,
}

impl<F: Scalar> Default for EpisodeConfig<F> {
    fn default() -> Self {
        Self {
            max_steps: 1000,
            subset_size: 10,
            reward_noise_sd: F::one(),
            convergence_streak: 5,
            reward_mode: RewardMode::Gaussian,
            stop_at_convergence: false,
        }
    }
}

impl<F: Scalar> EpisodeConfig<F> {
    pub fn validate(&self, available: usize) -> Result<()> {
        if self.subset_size == 0 || self.subset_size > available {
            return Err(Error::InvalidConfig(format!(
                "subset size {} must be in 1..={available}",
                self.subset_size
            )));
        }
        if self.convergence_streak == 0 {
            return Err(Error::InvalidConfig("convergence streak must be at least 1".into()));
        }
        if !(self.reward_noise_sd >= F::zero() && self.reward_noise_sd.finite()) {
            return Err(Error::InvalidConfig("reward noise must be a finite non-negative number".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step<F> {
    pub step: usize,
    pub offered: Vec<usize>,
    pub chosen: usize,
    pub reward: F,
    pub was_bad: bool,
    pub was_non_optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<F> {
    pub steps: Vec<Step<F>>,
}

impl<F: Scalar> Trajectory<F> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = F> + '_ {
        self.steps.iter().map(|s| s.reward)
    }
}

/// Draws one reward for `action` from the environment.
pub fn env_reward<F: Scalar, R: Rng + ?Sized>(
    action: usize,
    scores: &ValueScores<F>,
    cfg: &EpisodeConfig<F>,
    rng: &mut R,
) -> Result<F> {
    if action >= scores.len() {
        return Err(Error::InvalidConfig(format!("action {action} out of range")));
    }
    let score = scores.score(action);
    match cfg.reward_mode {
        RewardMode::Gaussian => {
            let z: f64 = StandardNormal.sample(rng);
            Ok(score + cfg.reward_noise_sd * F::lit(z))
        }
        RewardMode::Bernoulli => {
            let p = env_success_probability(score, scores)?.as_f64();
            Ok(if rng.random::<f64>() < p { F::one() } else { F::zero() })
        }
    }
}

fn run_loop<F: Scalar, R: Rng + ?Sized>(
    agent: &mut Agent<F>,
    scores: &ValueScores<F>,
    actions: &[usize],
    cfg: &EpisodeConfig<F>,
    rng: &mut R,
    learn: bool,
) -> Result<(Trajectory<F>, RunMetrics<F>)> {
    cfg.validate(actions.len())?;
    if scores.len() != agent.n_actions() {
        return Err(Error::DimensionMismatch { expected: agent.n_actions(), found: scores.len() });
    }
    if let Some(&bad) = actions.iter().find(|&&a| a >= scores.len()) {
        return Err(Error::InvalidConfig(format!("action {bad} out of range")));
    }

    let mut trajectory = Trajectory { steps: Vec::with_capacity(cfg.max_steps) };
    let mut reward_sum = F::zero();
    let mut bad_actions = 0;
    let mut non_optimal_actions = 0;
    let mut chosen_ids = BTreeSet::new();
    let mut streak = 0;
    let mut converged_at = None;

    for step in 0..cfg.max_steps {
        let mut offered: Vec<usize> = index::sample(rng, actions.len(), cfg.subset_size)
            .into_iter()
            .map(|i| actions[i])
            .collect();
        offered.sort_unstable();
        let chosen = agent.select_action(&offered, rng)?;
        let reward = env_reward(chosen, scores, cfg, rng)?;
        if learn {
            agent.observe(chosen, reward)?;
        }

        let best = offered
            .iter()
            .map(|&a| scores.score(a))
            .fold(scores.score(offered[0]), |a, b| if b > a { b } else { a });
        let was_non_optimal = scores.score(chosen) < best;
        let was_bad = scores.is_bad(chosen);
        reward_sum += reward;
        bad_actions += usize::from(was_bad);
        non_optimal_actions += usize::from(was_non_optimal);
        chosen_ids.insert(chosen);
        streak = if was_non_optimal { 0 } else { streak + 1 };
        trajectory.steps.push(Step { step, offered, chosen, reward, was_bad, was_non_optimal });

        if converged_at.is_none() && streak >= cfg.convergence_streak {
            converged_at = Some(step + 1);
            if cfg.stop_at_convergence {
                break;
            }
        }
    }

    let steps = trajectory.len();
    let mean_reward = if steps == 0 { F::zero() } else { reward_sum / F::from_count(steps) };
    let metrics = RunMetrics {
        steps,
        mean_reward,
        bad_actions,
        non_optimal_actions,
        unique_actions: chosen_ids.len(),
        iterations_to_convergence: if learn { converged_at } else { None },
        converged: learn && converged_at.is_some(),
        alignment: None,
    };
    Ok((trajectory, metrics))
}

/// The learning loop over `actions`: the agent observes every reward.
pub fn run_personalization<F: Scalar, R: Rng + ?Sized>(
    agent: &mut Agent<F>,
    scores: &ValueScores<F>,
    actions: &[usize],
    cfg: &EpisodeConfig<F>,
    rng: &mut R,
) -> Result<(Trajectory<F>, RunMetrics<F>)> {
    run_loop(agent, scores, actions, cfg, rng, true)
}

/// The same loop with the agent frozen first; convergence is not tracked and
/// the loop never stops early.
pub fn run_generalization<F: Scalar, R: Rng + ?Sized>(
    agent: &mut Agent<F>,
    scores: &ValueScores<F>,
    actions: &[usize],
    cfg: &EpisodeConfig<F>,
    rng: &mut R,
) -> Result<(Trajectory<F>, RunMetrics<F>)> {
    agent.freeze();
    let cfg = EpisodeConfig { stop_at_convergence: false, ..*cfg };
    run_loop(agent, scores, actions, &cfg, rng, false)
}

#[cfg(test)]
mod tests;
