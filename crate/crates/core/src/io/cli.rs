//! `repalign` command-line interface.
//!
//! Exit status: 0 on success, 1 on invalid input or usage, 2 on a failure
//! while running.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use super::formats::{default_actions, parse_actions, parse_kernel, parse_scores, score_value_names, write_kernel, write_scores};
use super::results::{emit_results, write_theory_report};
use crate::agents::{AgentConfig, AgentKind};
use crate::alignment::{alignment, AlignmentVariant};
use crate::domain::{split_random, SimilarityMatrix, ValueScale, ValueScores};
use crate::error::{Error, Result};
use crate::kernels::{corrupt_scores, length_kernel, length_scores, random_scores, score_kernel, CorruptionSpec};
use crate::simulation::{derive_seed, run_campaign, Campaign, CampaignResults, CorruptionPlan, SyntheticSetup};
use crate::theory::run_theory_checks;

#[derive(Debug, Parser)]
#[command(name = "repalign", version, about = "Kernel bandit simulations of representational alignment and value learning")]
struct Cli {
    /// Worker threads for campaign runs. Results do not depend on this.
    #[arg(long, global = true, default_value_t = default_parallelism())]
    parallelism: usize,
    #[command(subcommand)]
    command: Command,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Args)]
struct CampaignArgs {
    /// Runs per cell.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Master seed; every run seed is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for runs.csv, summary.csv and binned.tsv.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Steps per phase.
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    /// Shuffles for permutation p-values.
    #[arg(long, default_value_t = 10_000)]
    shuffles: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corruption campaign on synthetic [-3, 3] morality scores.
    Synthetic {
        /// Agent kind: svr, kernel_ridge, gp, thompson_baseline, or all. Repeatable.
        #[arg(long = "agent", default_value = "all")]
        agents: Vec<String>,
        /// Fixed corruption levels (comma separated). Default: k uniform over 0..=N per run.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Number of actions.
        #[arg(long, default_value_t = 50)]
        actions: usize,
        #[command(flatten)]
        campaign: CampaignArgs,
    },
    /// Per-value campaign over a directory of model kernels.
    HumanValues {
        /// Value name in the scores file. Repeatable; default is every value in the file.
        #[arg(long = "value")]
        values: Vec<String>,
        /// Scores file (`action_id,value_name,score`, 0-100 scale).
        #[arg(long)]
        scores: PathBuf,
        /// Directory of model kernels (`*.csv`), one per model.
        #[arg(long)]
        kernels_dir: PathBuf,
        /// Reference kernel used to measure alignment.
        #[arg(long)]
        human_kernel: PathBuf,
        #[arg(long, default_value = "kernel_ridge")]
        agent: String,
        #[command(flatten)]
        campaign: CampaignArgs,
    },
    /// Run every closed-form oracle; non-zero exit on any violation.
    TheoryCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per (ρ₀, c) grid point in the Chebyshev check.
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
    },
    /// Sweep a kernel linearly toward a reference kernel.
    Interpolate {
        /// Number of evenly spaced interpolation weights in [0, 1].
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// Starting kernel. Default: a fully corrupted synthetic kernel.
        #[arg(long, requires_all = ["target", "scores"])]
        base: Option<PathBuf>,
        /// Reference kernel. Default: the synthetic ground-truth kernel.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Scores file for the rewards (0-100 scale) when kernels come from files.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, default_value = "morality")]
        value: String,
        #[arg(long, default_value = "kernel_ridge")]
        agent: String,
        #[command(flatten)]
        campaign: CampaignArgs,
    },
    /// Description-length control: length kernel against alternatives under length rewards.
    Control {
        /// Action catalog. Default: the bundled 50 descriptions.
        #[arg(long)]
        actions: Option<PathBuf>,
        /// Human kernel to add to the grid.
        #[arg(long, requires = "morality_scores")]
        human_kernel: Option<PathBuf>,
        /// Scores file holding a `morality` value, for the morality-reward cells.
        #[arg(long)]
        morality_scores: Option<PathBuf>,
        #[arg(long, default_value = "kernel_ridge")]
        agent: String,
        #[command(flatten)]
        campaign: CampaignArgs,
    },
    /// Print full, personalization and cross alignment between two kernel files.
    Align {
        a: PathBuf,
        b: PathBuf,
        /// Seed for the personalization/generalization split.
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
    },
    /// Write a synthetic data set (scores, model kernels, reference kernel) for trying `human-values`.
    Generate {
        #[arg(long, default_value = "synthetic-data")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of model kernels, with corruption spread evenly from none to total.
        #[arg(long, default_value_t = 8)]
        kernels: usize,
    },
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn cli_dispatch<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn agent_kinds(names: &[String]) -> Result<Vec<AgentKind>> {
    let mut kinds = Vec::new();
    for name in names {
        if name == "all" {
            kinds.extend(AgentKind::ALL);
        } else {
            kinds.push(name.parse()?);
        }
    }
    kinds.dedup();
    Ok(kinds)
}

fn campaign_from(args: &CampaignArgs) -> Result<Campaign> {
    if args.runs == 0 {
        return Err(Error::InvalidConfig("--runs must be at least 1".into()));
    }
    let mut c = Campaign::new(args.seed);
    c.shuffles = args.shuffles;
    c.episode.max_steps = args.max_steps;
    c.synthetic.episode.max_steps = args.max_steps;
    Ok(c)
}

fn finish(results: &CampaignResults, dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let files = emit_results(results, dir)?;
    let failed = results.runs.iter().filter(|r| r.error.is_some()).count();
    for s in results.summary.iter().filter(|s| s.alignment_variant == "full" || s.alignment_variant == "alpha") {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(
            out,
            "{:<32} {:<15} {:<5} {:<26} rho={:>8} p={}",
            s.cell,
            s.phase.name(),
            s.alignment_variant,
            s.metric,
            fmt(s.spearman),
            fmt(s.p_value)
        );
    }
    for f in files {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    if failed > 0 {
        let _ = writeln!(out, "{failed} runs failed; see the error column of runs.csv");
    }
    Ok(0)
}

fn load_kernel(path: &Path, n: Option<usize>) -> Result<Arc<SimilarityMatrix<f64>>> {
    Ok(Arc::new(parse_kernel(path, n)?.kernel.normalized()?))
}

fn kernel_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Parse {
        path: dir.display().to_string(),
        line: 0,
        message: format!("cannot read directory: {e}"),
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidConfig(format!("no kernel files in {}", dir.display())));
    }
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let parallelism = cli.parallelism.max(1);
    match cli.command {
        Command::Synthetic { agents, levels, actions, campaign } => {
            let mut c = campaign_from(&campaign)?;
            c.synthetic.n_actions = actions;
            let plan = match levels {
                Some(l) => CorruptionPlan::Levels(l),
                None => CorruptionPlan::Uniform,
            };
            c.add_synthetic(&agent_kinds(&agents)?, &plan, campaign.runs);
            let results = run_campaign(&c, parallelism)?;
            finish(&results, &campaign.out, out)
        }
        Command::HumanValues { values, scores, kernels_dir, human_kernel, agent, campaign } => {
            let mut c = campaign_from(&campaign)?;
            let kind: AgentKind = agent.parse()?;
            let reference = load_kernel(&human_kernel, None)?;
            let n = reference.n();
            let kernels: Vec<(String, Arc<SimilarityMatrix<f64>>)> = kernel_files(&kernels_dir)?
                .into_iter()
                .map(|p| Ok((stem(&p), load_kernel(&p, Some(n))?)))
                .collect::<Result<_>>()?;
            let names = if values.is_empty() { score_value_names(&scores)? } else { values };
            let scale = ValueScale::human();
            let config = AgentConfig::new(kind).for_scale(&scale);
            for value in &names {
                let s = Arc::new(parse_scores(&scores, value, Some(n), scale)?);
                for (name, kernel) in &kernels {
                    c.add_value_runs(&format!("{value}/{}", kind.name()), config, name, Arc::clone(kernel), Arc::clone(&reference), Arc::clone(&s), None, campaign.runs);
                }
            }
            let results = run_campaign(&c, parallelism)?;
            finish(&results, &campaign.out, out)
        }
        Command::TheoryCheck { seed, trials } => {
            let report = run_theory_checks(seed, trials);
            write_theory_report(&mut *out, &report).map_err(|e| Error::io("stdout", e))?;
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Interpolate { steps, base, target, scores, value, agent, campaign } => {
            if steps < 2 {
                return Err(Error::InvalidConfig("--steps must be at least 2".into()));
            }
            let mut c = campaign_from(&campaign)?;
            let kind: AgentKind = agent.parse()?;
            let (base, target, scores, config) = match (base, target, scores) {
                (Some(b), Some(t), Some(s)) => {
                    let target = load_kernel(&t, None)?;
                    let base = load_kernel(&b, Some(target.n()))?;
                    let scores = parse_scores(&s, &value, Some(target.n()), ValueScale::human())?;
                    let config = AgentConfig::new(kind).for_scale(scores.scale());
                    (base, target, scores, config)
                }
                _ => {
                    let (base, target, scores) = synthetic_sweep_inputs(campaign.seed)?;
                    (base, target, scores, AgentConfig { kind, ..SyntheticSetup::default().agent })
                }
            };
            let scores = Arc::new(scores);
            for i in 0..steps {
                let alpha = i as f64 / (steps - 1) as f64;
                let kernel = Arc::new(crate::kernels::interpolate_kernel(&base, &target, alpha)?);
                c.add_value_runs(&format!("alpha={alpha:.3}"), config, "interpolated", kernel, Arc::clone(&target), Arc::clone(&scores), Some(alpha), campaign.runs);
            }
            let results = run_campaign(&c, parallelism)?;
            let sweep = crate::simulation::summarize(
                &results.runs.iter().cloned().map(|mut r| {
                    r.cell = "sweep".into();
                    r
                }).collect::<Vec<_>>(),
                campaign.seed,
                campaign.shuffles,
                0.05,
            )?;
            let mut results = results;
            results.summary.extend(sweep.0.into_iter().filter(|s| s.alignment_variant == "alpha"));
            finish(&results, &campaign.out, out)
        }
        Command::Control { actions, human_kernel, morality_scores, agent, campaign } => {
            let mut c = campaign_from(&campaign)?;
            let kind: AgentKind = agent.parse()?;
            let actions = match actions {
                Some(p) => parse_actions(p)?,
                None => default_actions(),
            };
            let n = actions.len();
            let scale = ValueScale::human();
            let config = AgentConfig::new(kind).for_scale(&scale);
            let length = Arc::new(length_kernel::<f64>(&actions)?);
            let length_reward = Arc::new(length_scores::<f64>(&actions)?);
            let mut rng = crate::simulation::experiments_stream(derive_seed(campaign.seed, u64::MAX));
            let random = Arc::new(score_kernel(&random_scores("random", n, scale, &mut rng)?)?);
            let mut kernels = vec![("length".to_string(), Arc::clone(&length)), ("random".to_string(), random)];
            let mut rewards = vec![("length".to_string(), Arc::clone(&length_reward), Arc::clone(&length))];
            if let (Some(hk), Some(ms)) = (human_kernel, morality_scores) {
                let human = load_kernel(&hk, Some(n))?;
                let morality = Arc::new(parse_scores(&ms, "morality", Some(n), scale)?);
                kernels.push(("human".to_string(), Arc::clone(&human)));
                rewards.push(("morality".to_string(), morality, human));
            }
            for (reward_name, scores, reference) in &rewards {
                for (kernel_name, kernel) in &kernels {
                    c.add_value_runs(
                        &format!("{kernel_name}-kernel/{reward_name}-reward"),
                        config,
                        kernel_name,
                        Arc::clone(kernel),
                        Arc::clone(reference),
                        Arc::clone(scores),
                        None,
                        campaign.runs,
                    );
                }
            }
            let results = run_campaign(&c, parallelism)?;
            control_table(&results, out);
            finish(&results, &campaign.out, out)
        }
        Command::Align { a, b, split_seed } => {
            let ka = parse_kernel(&a, None)?.kernel;
            let kb = parse_kernel(&b, Some(ka.n()))?.kernel;
            let split = split_random(ka.n(), &mut crate::simulation::experiments_stream(split_seed))?;
            for variant in [AlignmentVariant::Full, AlignmentVariant::Pers(split.clone()), AlignmentVariant::Cross(split)] {
                let value = alignment(&ka, &kb, &variant)?;
                let _ = writeln!(out, "{}\t{value}", variant.name());
            }
            Ok(0)
        }
        Command::Generate { out: dir, seed, kernels } => {
            generate(&dir, seed, kernels)?;
            let _ = writeln!(out, "wrote synthetic data set to {}", dir.display());
            Ok(0)
        }
    }
}

type SweepInputs = (Arc<SimilarityMatrix<f64>>, Arc<SimilarityMatrix<f64>>, ValueScores<f64>);

/// Fully corrupted kernel, ground-truth kernel and ground-truth scores on the [-3, 3] scale.
fn synthetic_sweep_inputs(seed: u64) -> Result<SweepInputs> {
    let scale = ValueScale::synthetic();
    let mut rng = crate::simulation::experiments_stream(derive_seed(seed, u64::MAX));
    let truth = random_scores("morality", 50, scale, &mut rng)?;
    let corrupted = corrupt_scores(&truth, &CorruptionSpec::over_scale(50, &scale), &mut rng)?;
    Ok((Arc::new(score_kernel(&corrupted)?), Arc::new(score_kernel(&truth)?), truth))
}

fn control_table(results: &CampaignResults, out: &mut dyn Write) {
    let mut cells: Vec<&str> = Vec::new();
    for r in &results.runs {
        if !cells.contains(&r.cell.as_str()) {
            cells.push(&r.cell);
        }
    }
    let _ = writeln!(out, "{:<32} {:<15} {:>12} {:>12}", "cell", "phase", "mean_reward", "bad_actions");
    for cell in cells {
        for phase in [crate::simulation::Phase::Personalization, crate::simulation::Phase::Generalization] {
            let rows: Vec<_> = results.runs.iter().filter(|r| r.cell == cell && r.phase == phase).filter_map(|r| r.metrics.as_ref()).collect();
            if rows.is_empty() {
                continue;
            }
            let n = rows.len() as f64;
            let reward = rows.iter().map(|m| m.mean_reward).sum::<f64>() / n;
            let bad = rows.iter().map(|m| m.bad_actions as f64).sum::<f64>() / n;
            let _ = writeln!(out, "{cell:<32} {:<15} {reward:>12.3} {bad:>12.3}", phase.name());
        }
    }
}

fn generate(dir: &Path, seed: u64, count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidConfig("--kernels must be at least 1".into()));
    }
    let kernels_dir = dir.join("kernels");
    fs::create_dir_all(&kernels_dir).map_err(|e| Error::io(&kernels_dir, e))?;
    let scale = ValueScale::human();
    let mut rng = crate::simulation::experiments_stream(seed);
    let morality = random_scores("morality", 50, scale, &mut rng)?;
    let fairness = random_scores("fairness", 50, scale, &mut rng)?;
    write_scores(dir.join("scores.csv"), &[&morality, &fairness])?;
    write_kernel(dir.join("human_kernel.csv"), &score_kernel(&morality)?)?;
    for i in 0..count {
        let k = if count == 1 { 0 } else { i * 50 / (count - 1) };
        let corrupted = corrupt_scores(&morality, &CorruptionSpec::over_scale(k, &scale), &mut rng)?;
        write_kernel(kernels_dir.join(format!("model_{i:02}_k{k}.csv")), &score_kernel(&corrupted)?)?;
    }
    Ok(())
}
