//! Campaign runner: expands a grid into independent runs, executes them on a
//! thread pool, and reduces the rows into correlation and binned summaries.
//!
//! Every run's seed is a hash of the master seed and the run's replicate
//! index, so results never depend on scheduling order or thread count, and
//! runs with the same replicate index in different cells share their
//! environment (paired design).

use std::sync::Arc;

use rayon::prelude::*;

use super::experiments::{run_synthetic_experiment, run_value_experiment, uniform_corruption, SyntheticSetup};
use super::EpisodeConfig;
use crate::agents::{AgentConfig, AgentKind};
use crate::alignment::{bin_series, spearman_permutation_test};
use crate::domain::{RunMetrics, SimilarityMatrix, ValueScores};
use crate::error::{Error, Result};

/// Metric names, in output order.
pub const METRICS: [&str; 5] = [
    "mean_reward",
    "unique_actions",
    "non_optimal_actions",
    "bad_actions",
    "iterations_to_convergence",
];

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for replicate `rep` of a campaign with the given master seed.
pub fn derive_seed(master: u64, rep: u64) -> u64 {
    splitmix(splitmix(master) ^ rep.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorruptionPlan {
    /// `k` drawn uniformly from `0..=N` per run.
    Uniform,
    /// One cell per listed level.
    Levels(Vec<usize>),
}

/// The experiment one run performs.
#[derive(Debug, Clone)]
pub enum Job {
    Synthetic {
        agent: AgentKind,
        corruption: Option<usize>,
    },
    Value {
        agent: AgentConfig<f64>,
        kernel_name: String,
        kernel: Arc<SimilarityMatrix<f64>>,
        reference: Arc<SimilarityMatrix<f64>>,
        scores: Arc<ValueScores<f64>>,
        alpha: Option<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct RunTask {
    pub cell: String,
    pub replicate: u64,
    pub job: Job,
}

/// A fully expanded campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub master_seed: u64,
    pub synthetic: SyntheticSetup<f64>,
    pub episode: EpisodeConfig<f64>,
    pub shuffles: usize,
    pub bin_width: f64,
    pub tasks: Vec<RunTask>,
}

impl Campaign {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            synthetic: SyntheticSetup::default(),
            episode: EpisodeConfig::default(),
            shuffles: 10_000,
            bin_width: 0.05,
            tasks: Vec::new(),
        }
    }

    /// Adds `runs` synthetic runs per agent kind (and per corruption level, for a level grid).
    pub fn add_synthetic(&mut self, agents: &[AgentKind], plan: &CorruptionPlan, runs: usize) {
        for &agent in agents {
            match plan {
                CorruptionPlan::Uniform => {
                    for rep in 0..runs as u64 {
                        self.tasks.push(RunTask {
                            cell: agent.name().to_string(),
                            replicate: rep,
                            job: Job::Synthetic { agent, corruption: None },
                        });
                    }
                }
                CorruptionPlan::Levels(levels) => {
                    for &k in levels {
                        for rep in 0..runs as u64 {
                            self.tasks.push(RunTask {
                                cell: format!("{}/k={k}", agent.name()),
                                replicate: rep,
                                job: Job::Synthetic { agent, corruption: Some(k) },
                            });
                        }
                    }
                }
            }
        }
    }

    /// Adds `runs` personalization + generalization runs of one kernel against a reference.
    #[allow(clippy::too_many_arguments)]
    pub fn add_value_runs(
        &mut self,
        cell: &str,
        agent: AgentConfig<f64>,
        kernel_name: &str,
        kernel: Arc<SimilarityMatrix<f64>>,
        reference: Arc<SimilarityMatrix<f64>>,
        scores: Arc<ValueScores<f64>>,
        alpha: Option<f64>,
        runs: usize,
    ) {
        for rep in 0..runs as u64 {
            self.tasks.push(RunTask {
                cell: cell.to_string(),
                replicate: rep,
                job: Job::Value {
                    agent,
                    kernel_name: kernel_name.to_string(),
                    kernel: Arc::clone(&kernel),
                    reference: Arc::clone(&reference),
                    scores: Arc::clone(&scores),
                    alpha,
                },
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Personalization,
    Generalization,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Personalization => "personalization",
            Phase::Generalization => "generalization",
        }
    }
}

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub run_index: usize,
    pub cell: String,
    pub seed: u64,
    pub agent: AgentKind,
    pub kernel: String,
    pub value: String,
    pub corruption: Option<usize>,
    pub alpha: Option<f64>,
    pub phase: Phase,
    pub alignment_full: Option<f64>,
    pub alignment_pers: Option<f64>,
    pub alignment_cross: Option<f64>,
    pub metrics: Option<RunMetrics<f64>>,
    pub error: Option<String>,
}

impl RunRow {
    /// Value of a named metric; non-converged runs count their full length as iterations.
    pub fn metric(&self, name: &str) -> Option<f64> {
        let m = self.metrics.as_ref()?;
        match name {
            "mean_reward" => Some(m.mean_reward),
            "unique_actions" => Some(m.unique_actions as f64),
            "non_optimal_actions" => Some(m.non_optimal_actions as f64),
            "bad_actions" => Some(m.bad_actions as f64),
            "iterations_to_convergence" if self.phase == Phase::Personalization => {
                Some(m.iterations_to_convergence.unwrap_or(m.steps) as f64)
            }
            _ => None,
        }
    }

    pub fn alignment(&self, variant: &str) -> Option<f64> {
        match variant {
            "full" => self.alignment_full,
            "pers" => self.alignment_pers,
            "cross" => self.alignment_cross,
            "alpha" => self.alpha,
            _ => None,
        }
    }
}

fn execute(task: &RunTask, index: usize, campaign: &Campaign) -> Vec<RunRow> {
    let seed = derive_seed(campaign.master_seed, task.replicate);
    match &task.job {
        Job::Synthetic { agent, corruption } => {
            let k = corruption.unwrap_or_else(|| uniform_corruption(seed, campaign.synthetic.n_actions));
            let mut row = RunRow {
                run_index: index,
                cell: task.cell.clone(),
                seed,
                agent: *agent,
                kernel: "corrupted".into(),
                value: "synthetic".into(),
                corruption: Some(k),
                alpha: None,
                phase: Phase::Personalization,
                alignment_full: None,
                alignment_pers: None,
                alignment_cross: None,
                metrics: None,
                error: None,
            };
            match run_synthetic_experiment(*agent, k, seed, &campaign.synthetic) {
                Ok((align, metrics)) => {
                    row.alignment_full = Some(align);
                    row.metrics = Some(metrics);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            vec![row]
        }
        Job::Value { agent, kernel_name, kernel, reference, scores, alpha } => {
            let base = |phase| RunRow {
                run_index: index,
                cell: task.cell.clone(),
                seed,
                agent: agent.kind,
                kernel: kernel_name.clone(),
                value: scores.value_name().to_string(),
                corruption: None,
                alpha: *alpha,
                phase,
                alignment_full: None,
                alignment_pers: None,
                alignment_cross: None,
                metrics: None,
                error: None,
            };
            let mut pers = base(Phase::Personalization);
            let mut gen = base(Phase::Generalization);
            match run_value_experiment(kernel, scores, reference, agent, &campaign.episode, seed) {
                Ok(rec) => {
                    for row in [&mut pers, &mut gen] {
                        row.alignment_full = Some(rec.alignment_full);
                        row.alignment_pers = Some(rec.alignment_pers);
                        row.alignment_cross = Some(rec.alignment_cross);
                    }
                    pers.metrics = Some(rec.personalization);
                    gen.metrics = Some(rec.generalization);
                }
                Err(e) => {
                    pers.error = Some(e.to_string());
                    gen.error = Some(e.to_string());
                }
            }
            vec![pers, gen]
        }
    }
}

/// Spearman correlation between an alignment measure and a metric within one cell and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: String,
    pub phase: Phase,
    pub alignment_variant: String,
    pub metric: String,
    pub n: usize,
    pub spearman: Option<f64>,
    pub p_value: Option<f64>,
}

/// One bin of a metric against full alignment within one cell and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedRow {
    pub cell: String,
    pub phase: Phase,
    pub metric: String,
    pub bin_width: f64,
    pub center: f64,
    pub mean: f64,
    pub standard_error: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResults {
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
    pub binned: Vec<BinnedRow>,
}

impl CampaignResults {
    /// Summary row for a cell/phase/variant/metric, if present.
    pub fn find_summary(&self, cell: &str, phase: Phase, variant: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.cell == cell && s.phase == phase && s.alignment_variant == variant && s.metric == metric)
    }
}

/// Groups rows by (cell, phase) in order of first appearance.
fn groups(rows: &[RunRow]) -> Vec<((String, Phase), Vec<&RunRow>)> {
    let mut out: Vec<((String, Phase), Vec<&RunRow>)> = Vec::new();
    for row in rows {
        let key = (row.cell.clone(), row.phase);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(row),
            None => out.push((key, vec![row])),
        }
    }
    out
}

/// Correlation and binned summaries for a set of rows.
pub fn summarize(rows: &[RunRow], master_seed: u64, shuffles: usize, bin_width: f64) -> Result<(Vec<SummaryRow>, Vec<BinnedRow>)> {
    let mut summary = Vec::new();
    let mut binned = Vec::new();
    for (g, ((cell, phase), members)) in groups(rows).into_iter().enumerate() {
        for (v, variant) in ["full", "pers", "cross", "alpha"].into_iter().enumerate() {
            if !members.iter().any(|r| r.alignment(variant).is_some()) {
                continue;
            }
            for (m, metric) in METRICS.into_iter().enumerate() {
                let pairs: Vec<(f64, f64)> = members
                    .iter()
                    .filter_map(|r| Some((r.alignment(variant)?, r.metric(metric)?)))
                    .collect();
                if pairs.is_empty() {
                    continue;
                }
                let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
                let seed = derive_seed(master_seed ^ 0x5EED_5A17, ((g * 8 + v) * 8 + m) as u64);
                let test = spearman_permutation_test(&x, &y, shuffles, seed).ok();
                summary.push(SummaryRow {
                    cell: cell.clone(),
                    phase,
                    alignment_variant: variant.to_string(),
                    metric: metric.to_string(),
                    n: pairs.len(),
                    spearman: test.map(|t| t.rho),
                    p_value: test.map(|t| t.p_value),
                });
                if variant == "full" {
                    let series = bin_series(&pairs, bin_width)?;
                    binned.extend(series.bins.into_iter().map(|b| BinnedRow {
                        cell: cell.clone(),
                        phase,
                        metric: metric.to_string(),
                        bin_width,
                        center: b.center,
                        mean: b.mean,
                        standard_error: b.standard_error,
                        count: b.count,
                    }));
                }
            }
        }
    }
    Ok((summary, binned))
}

/// Executes every run with the given parallelism and summarizes the results.
///
/// Row order follows task order, so the output is identical for any thread count.
pub fn run_campaign(campaign: &Campaign, parallelism: usize) -> Result<CampaignResults> {
    if parallelism == 0 {
        return Err(Error::InvalidConfig("parallelism must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let per_task: Vec<Vec<RunRow>> = pool.install(|| {
        campaign
            .tasks
            .par_iter()
            .enumerate()
            .map(|(i, task)| execute(task, i, campaign))
            .collect()
    });
    let runs: Vec<RunRow> = per_task.into_iter().flatten().collect();
    let (summary, binned) = summarize(&runs, campaign.master_seed, campaign.shuffles, campaign.bin_width)?;
    Ok(CampaignResults { runs, summary, binned })
}
