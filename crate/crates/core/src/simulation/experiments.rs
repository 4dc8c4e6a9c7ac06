use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run_generalization, run_personalization, EpisodeConfig, RewardMode};
use crate::agents::{Agent, AgentConfig, AgentKind};
use crate::alignment::{alignment, AlignmentVariant};
use crate::domain::{split_random, RunMetrics, SimilarityMatrix, SplitSpec, ValueScale, ValueScores};
use crate::error::{Error, Result};
use crate::kernels::{corrupt_scores, random_scores, score_kernel, CorruptionSpec};
use crate::scalar::Scalar;

/// Stream carrying environment construction (ground truth, corruption, split).
pub const ENV_STREAM: u64 = 0;
/// Stream carrying everything drawn while an episode runs.
pub const EPISODE_STREAM: u64 = 1;
const CORRUPTION_STREAM: u64 = 2;

pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generic seeded generator for setup work outside a single run.
pub fn experiments_stream(seed: u64) -> ChaCha8Rng {
    stream(seed, ENV_STREAM)
}

/// Parameters of the synthetic corruption experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSetup<F> {
    pub n_actions: usize,
    pub scale: ValueScale<F>,
    pub episode: EpisodeConfig<F>,
    /// Template for the kernel agents; `kind` is overwritten per run.
    pub agent: AgentConfig<F>,
}

impl<F: Scalar> Default for SyntheticSetup<F> {
    fn default() -> Self {
        let scale = ValueScale::synthetic();
        let mut agent = AgentConfig::new(AgentKind::Gp);
        agent.prior_mean = scale.midpoint();
        // Ridge and GP share a closed form when λ equals the noise variance.
        agent.ridge_lambda = agent.noise_variance;
        Self {
            n_actions: 50,
            scale,
            episode: EpisodeConfig { stop_at_convergence: true, ..EpisodeConfig::default() },
            agent,
        }
    }
}

/// Episode settings for one agent kind: the beta-Bernoulli baseline always sees binary rewards.
pub fn episode_for<F: Scalar>(kind: AgentKind, episode: &EpisodeConfig<F>) -> EpisodeConfig<F> {
    match kind {
        AgentKind::ThompsonBaseline => EpisodeConfig { reward_mode: RewardMode::Bernoulli, ..*episode },
        _ => *episode,
    }
}

/// One synthetic run: random ground truth, `k` corrupted actions, personalization over all actions.
///
/// Returns the full-variant alignment between the true and corrupted kernels
/// and the run's metrics. Ground truth depends on the seed only, so runs with
/// the same seed but different agent kinds or `k` share an environment.
pub fn run_synthetic_experiment<F: Scalar>(
    kind: AgentKind,
    k: usize,
    seed: u64,
    setup: &SyntheticSetup<F>,
) -> Result<(F, RunMetrics<F>)> {
    let n = setup.n_actions;
    if k > n {
        return Err(Error::InvalidConfig(format!("corruption count {k} exceeds {n} actions")));
    }
    let truth = random_scores("morality", n, setup.scale, &mut stream(seed, ENV_STREAM))?;
    let corrupted = corrupt_scores(&truth, &CorruptionSpec::over_scale(k, &setup.scale), &mut stream(seed, CORRUPTION_STREAM))?;
    let true_kernel = score_kernel(&truth)?;
    let agent_kernel = score_kernel(&corrupted)?;
    let align = alignment(&true_kernel, &agent_kernel, &AlignmentVariant::Full)?;

    let config = AgentConfig { kind, ..setup.agent };
    let mut agent = Agent::new(Arc::new(agent_kernel), config)?;
    let actions: Vec<usize> = (0..n).collect();
    let episode = episode_for(kind, &setup.episode);
    let (_, mut metrics) = run_personalization(&mut agent, &truth, &actions, &episode, &mut stream(seed, EPISODE_STREAM))?;
    metrics.alignment = Some(align);
    Ok((align, metrics))
}

/// Outcome of a personalization + generalization experiment on one kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueRecord<F> {
    pub split: SplitSpec,
    pub alignment_full: F,
    pub alignment_pers: F,
    pub alignment_cross: F,
    pub personalization: RunMetrics<F>,
    pub generalization: RunMetrics<F>,
}

/// Random split; learn on the personalization half; freeze; act on the generalization half.
///
/// All three alignment variants are measured between `kernel` (the agent's)
/// and `reference` (the human or ground-truth kernel).
pub fn run_value_experiment<F: Scalar>(
    kernel: &Arc<SimilarityMatrix<F>>,
    scores: &ValueScores<F>,
    reference: &SimilarityMatrix<F>,
    agent_config: &AgentConfig<F>,
    episode: &EpisodeConfig<F>,
    seed: u64,
) -> Result<ValueRecord<F>> {
    let n = kernel.n();
    if reference.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: reference.n() });
    }
    if scores.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: scores.len() });
    }
    let split = split_random(n, &mut stream(seed, ENV_STREAM))?;
    let alignment_full = alignment(kernel, reference, &AlignmentVariant::Full)?;
    let alignment_pers = alignment(kernel, reference, &AlignmentVariant::Pers(split.clone()))?;
    let alignment_cross = alignment(kernel, reference, &AlignmentVariant::Cross(split.clone()))?;

    let mut agent = Agent::new(Arc::clone(kernel), *agent_config)?;
    let episode = episode_for(agent_config.kind, episode);
    let mut rng = stream(seed, EPISODE_STREAM);
    let (_, mut personalization) = run_personalization(&mut agent, scores, split.personalization(), &episode, &mut rng)?;
    let (_, mut generalization) = run_generalization(&mut agent, scores, split.generalization(), &episode, &mut rng)?;
    personalization.alignment = Some(alignment_full);
    generalization.alignment = Some(alignment_full);
    Ok(ValueRecord { split, alignment_full, alignment_pers, alignment_cross, personalization, generalization })
}

/// Corruption count drawn uniformly from `0..=n` for a run seed.
pub(crate) fn uniform_corruption(seed: u64, n: usize) -> usize {
    stream(seed, CORRUPTION_STREAM + 1).random_range(0..=n)
}
