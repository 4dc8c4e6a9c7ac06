//! Learners that map a frozen similarity kernel to reward predictions.
//!
//! Every agent follows the same contract: predict rewards for candidate
//! actions, select one by Thompson sampling over those predictions, observe
//! the reward, and optionally freeze so later observations are refused.

mod baseline;
mod gp;
mod ridge;
pub mod svr;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::domain::{nearest_psd, validate_kernel, SimilarityMatrix, ValueScale, ValueScores, DEFAULT_PSD_FLOOR};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use svr::SvrFit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Gp,
    KernelRidge,
    Svr,
    ThompsonBaseline,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Svr, AgentKind::KernelRidge, AgentKind::Gp, AgentKind::ThompsonBaseline];
    pub const KERNEL: [AgentKind; 3] = [AgentKind::Svr, AgentKind::KernelRidge, AgentKind::Gp];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Gp => "gp",
            AgentKind::KernelRidge => "kernel_ridge",
            AgentKind::Svr => "svr",
            AgentKind::ThompsonBaseline => "thompson_baseline",
        }
    }

    pub fn uses_kernel(self) -> bool {
        self != AgentKind::ThompsonBaseline
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gp" => Ok(AgentKind::Gp),
            "kernel_ridge" | "ridge" | "krr" => Ok(AgentKind::KernelRidge),
            "svr" => Ok(AgentKind::Svr),
            "thompson_baseline" | "thompson" | "baseline" => Ok(AgentKind::ThompsonBaseline),
            other => Err(Error::InvalidConfig(format!("unknown agent kind `{other}`"))),
        }
    }
}

/// Hyperparameters for every agent kind; each kind reads the fields it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig<F> {
    pub kind: AgentKind,
    pub ridge_lambda: F,
    pub noise_variance: F,
    pub svr_c: F,
    pub svr_epsilon: F,
    pub svr_tolerance: F,
    /// Budget of SMO pair updates, in units of the number of training points.
    pub svr_max_passes: usize,
    /// GP signal variance; also the uncertainty scale for ridge and SVR sampling.
    pub exploration_variance: F,
    pub jitter: F,
    /// Prediction before any data, and the centering offset when `center_on_observed_mean` is off.
    pub prior_mean: F,
    /// Center rewards on the mean of all observed rewards before fitting.
    pub center_on_observed_mean: bool,
}

impl<F: Scalar> AgentConfig<F> {
    pub fn new(kind: AgentKind) -> Self {
        Self {
            kind,
            ridge_lambda: F::lit(0.1),
            noise_variance: F::lit(1.0),
            svr_c: F::lit(1.0),
            svr_epsilon: F::lit(0.1),
            svr_tolerance: F::lit(1e-3),
            svr_max_passes: 1000,
            exploration_variance: F::lit(1.0),
            jitter: F::lit(1e-6),
            prior_mean: F::zero(),
            center_on_observed_mean: true,
        }
    }

    /// Adapts the defaults, which are expressed for a scale six units wide,
    /// to `scale`: spreads grow with its width and the prior sits at its midpoint.
    pub fn for_scale(mut self, scale: &ValueScale<F>) -> Self {
        let factor = scale.range() / F::lit(6.0);
        self.exploration_variance *= factor * factor;
        self.svr_c *= factor;
        self.svr_epsilon *= factor;
        self.svr_tolerance *= factor;
        self.prior_mean = scale.midpoint();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ridge_lambda", self.ridge_lambda),
            ("noise_variance", self.noise_variance),
            ("svr_c", self.svr_c),
            ("svr_tolerance", self.svr_tolerance),
            ("exploration_variance", self.exploration_variance),
            ("jitter", self.jitter),
        ];
        for (name, v) in positive {
            if !(v > F::zero() && v.finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.svr_epsilon >= F::zero() && self.svr_epsilon.finite()) {
            return Err(Error::InvalidConfig(format!("svr_epsilon must be non-negative, got {}", self.svr_epsilon)));
        }
        if self.svr_max_passes == 0 {
            return Err(Error::InvalidConfig("svr_max_passes must be at least 1".into()));
        }
        if !self.prior_mean.finite() {
            return Err(Error::InvalidConfig("prior_mean must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<F> {
    pub step: usize,
    pub action: usize,
    pub reward: F,
}

/// Per-action reward aggregates plus the chronological log they summarize.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStore<F> {
    counts: Vec<usize>,
    sums: Vec<F>,
    log: Vec<Observation<F>>,
}

impl<F: Scalar> ObservationStore<F> {
    pub fn new(n_actions: usize) -> Self {
        Self { counts: vec![0; n_actions], sums: vec![F::zero(); n_actions], log: Vec::new() }
    }

    fn record(&mut self, action: usize, reward: F) {
        self.counts[action] += 1;
        self.sums[action] += reward;
        self.log.push(Observation { step: self.log.len(), action, reward });
    }

    pub fn count(&self, action: usize) -> usize {
        self.counts[action]
    }

    pub fn mean(&self, action: usize) -> Option<F> {
        match self.counts[action] {
            0 => None,
            c => Some(self.sums[action] / F::from_count(c)),
        }
    }

    /// Ids observed at least once, ascending.
    pub fn observed(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&a| self.counts[a] > 0).collect()
    }

    pub fn total(&self) -> usize {
        self.log.len()
    }

    pub fn log(&self) -> &[Observation<F>] {
        &self.log
    }

    pub fn grand_mean(&self) -> Option<F> {
        if self.log.is_empty() {
            return None;
        }
        let sum = self.sums.iter().fold(F::zero(), |a, &b| a + b);
        Some(sum / F::from_count(self.log.len()))
    }
}

/// Predictive mean and standard deviation for one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<F> {
    pub mean: F,
    pub standard_deviation: F,
}

#[derive(Debug, Clone)]
enum Fit<F: Scalar> {
    Gp(gp::GpFit<F>),
    Ridge(ridge::RidgeFit<F>),
    Svr(SvrFit<F>),
}

/// A learner bound to one frozen kernel.
#[derive(Debug, Clone)]
pub struct Agent<F: Scalar> {
    kernel: Arc<SimilarityMatrix<F>>,
    config: AgentConfig<F>,
    store: ObservationStore<F>,
    arms: baseline::BetaArms,
    frozen: bool,
    fit: Option<Fit<F>>,
    svr_warm_start: Option<SvrFit<F>>,
}

impl<F: Scalar> Agent<F> {
    /// Validates the kernel and, for kernel agents, repairs it to be positive definite.
    pub fn new(kernel: Arc<SimilarityMatrix<F>>, config: AgentConfig<F>) -> Result<Self> {
        config.validate()?;
        let problems = validate_kernel(&kernel);
        if !problems.is_empty() {
            return Err(Error::InvalidKernel(problems.join("; ")));
        }
        let floor = F::lit(DEFAULT_PSD_FLOOR);
        let kernel = if config.kind.uses_kernel() && kernel.min_eigenvalue()? < floor {
            Arc::new(nearest_psd(&kernel, floor)?)
        } else {
            kernel
        };
        let n = kernel.n();
        Ok(Self {
            kernel,
            config,
            store: ObservationStore::new(n),
            arms: baseline::BetaArms::new(n),
            frozen: false,
            fit: None,
            svr_warm_start: None,
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.config.kind
    }

    pub fn config(&self) -> &AgentConfig<F> {
        &self.config
    }

    pub fn kernel(&self) -> &SimilarityMatrix<F> {
        &self.kernel
    }

    pub fn observations(&self) -> &ObservationStore<F> {
        &self.store
    }

    pub fn n_actions(&self) -> usize {
        self.kernel.n()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Refuses all later observations. Idempotent.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Offset subtracted from rewards before fitting and added back to predictions.
    pub fn center(&self) -> F {
        match self.store.grand_mean() {
            Some(m) if self.config.center_on_observed_mean => m,
            _ => self.config.prior_mean,
        }
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&a| a >= self.n_actions()) {
            Some(&a) => Err(Error::InvalidConfig(format!("action {a} out of range for {} actions", self.n_actions()))),
            None => Ok(()),
        }
    }

    fn ensure_fit(&mut self) -> Result<()> {
        if self.fit.is_some() || self.store.total() == 0 {
            return Ok(());
        }
        let fit = match self.config.kind {
            AgentKind::Gp => Fit::Gp(gp::GpFit::new(&self.kernel, &self.store, &self.config, self.center())?),
            AgentKind::KernelRidge => Fit::Ridge(ridge::RidgeFit::new(&self.kernel, &self.store, &self.config, self.center())?),
            AgentKind::Svr => Fit::Svr(svr::fit_agent(&self.kernel, &self.store, &self.config, self.center(), self.svr_warm_start.as_ref())),
            AgentKind::ThompsonBaseline => return Ok(()),
        };
        self.fit = Some(fit);
        Ok(())
    }

    /// Predictive distribution for each target id.
    pub fn predict(&mut self, targets: &[usize]) -> Result<Vec<Prediction<F>>> {
        self.check_ids(targets)?;
        self.ensure_fit()?;
        let center = self.center();
        let explore = self.config.exploration_variance;
        let heuristic_sd = |count: usize| (explore / F::from_count(1 + count)).root();
        let out = match (self.config.kind, &self.fit) {
            (AgentKind::ThompsonBaseline, _) => targets.iter().map(|&t| self.arms.prediction(t)).collect(),
            (AgentKind::Gp, None) => targets
                .iter()
                .map(|&t| Prediction { mean: center, standard_deviation: (explore * self.kernel.get(t, t)).root() })
                .collect(),
            (_, None) => targets
                .iter()
                .map(|&t| Prediction { mean: center, standard_deviation: heuristic_sd(self.store.count(t)) })
                .collect(),
            (_, Some(Fit::Gp(fit))) => targets.iter().map(|&t| fit.predict(&self.kernel, t)).collect(),
            (_, Some(Fit::Ridge(fit))) => targets
                .iter()
                .map(|&t| Prediction { mean: fit.mean(&self.kernel, t), standard_deviation: heuristic_sd(self.store.count(t)) })
                .collect(),
            (_, Some(Fit::Svr(fit))) => targets
                .iter()
                .map(|&t| Prediction { mean: center + fit.decision(&self.kernel, t), standard_deviation: heuristic_sd(self.store.count(t)) })
                .collect(),
        };
        Ok(out)
    }

    /// Current SVR dual solution. Only meaningful for SVR agents with at least one observation.
    pub fn svr_fit(&mut self) -> Result<SvrFit<F>> {
        if self.config.kind != AgentKind::Svr {
            return Err(Error::InvalidConfig(format!("svr_fit called on a {} agent", self.config.kind)));
        }
        if self.store.total() == 0 {
            return Err(Error::InvalidConfig("svr_fit needs at least one observation".into()));
        }
        self.ensure_fit()?;
        match &self.fit {
            Some(Fit::Svr(fit)) => Ok(fit.clone()),
            _ => unreachable!("svr agent always caches an svr fit"),
        }
    }

    /// Thompson sampling: one posterior draw per available action, argmax with random tie-break.
    pub fn select_action<R: Rng + ?Sized>(&mut self, available: &[usize], rng: &mut R) -> Result<usize> {
        if available.is_empty() {
            return Err(Error::EmptyChoice);
        }
        self.check_ids(available)?;
        let pick = if self.config.kind == AgentKind::ThompsonBaseline {
            let draws: Vec<f64> = available
                .iter()
                .map(|&a| {
                    let (alpha, beta) = self.arms.posterior(a);
                    Beta::new(alpha, beta).expect("beta parameters are at least 1").sample(rng)
                })
                .collect();
            argmax_random_tie(&draws, rng)
        } else {
            thompson_pick(&self.predict(available)?, rng)
        };
        pick.map(|i| available[i]).ok_or_else(|| Error::Singular("non-finite predictive draws".into()))
    }

    /// Records a reward and invalidates the cached fit. Frozen agents refuse.
    pub fn observe(&mut self, action: usize, reward: F) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        self.check_ids(&[action])?;
        if !reward.finite() {
            return Err(Error::InvalidConfig(format!("reward {reward} is not finite")));
        }
        self.store.record(action, reward);
        if self.config.kind == AgentKind::ThompsonBaseline {
            self.arms.record(action, reward.as_f64());
        }
        if let Some(Fit::Svr(fit)) = self.fit.take() {
            self.svr_warm_start = Some(fit);
        }
        Ok(())
    }
}

/// One normal draw per prediction; index of the largest.
pub(crate) fn thompson_pick<F: Scalar, R: Rng + ?Sized>(preds: &[Prediction<F>], rng: &mut R) -> Option<usize> {
    let draws: Vec<f64> = preds
        .iter()
        .map(|p| {
            let z: f64 = StandardNormal.sample(rng);
            p.mean.as_f64() + p.standard_deviation.as_f64() * z
        })
        .collect();
    argmax_random_tie(&draws, rng)
}

fn argmax_random_tie<R: Rng + ?Sized>(draws: &[f64], rng: &mut R) -> Option<usize> {
    let best = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..draws.len()).filter(|&i| draws[i] == best).collect();
    match winners.len() {
        0 => None,
        1 => Some(winners[0]),
        w => Some(winners[rng.random_range(0..w)]),
    }
}

/// Success probability for the Bernoulli environment: a sigmoid of the
/// score standardized by the scale midpoint and quarter-range.
pub fn env_success_probability<F: Scalar>(score: F, scores: &ValueScores<F>) -> Result<F> {
    let scale = scores.scale();
    let quarter = scale.range() * F::lit(0.25);
    if !(quarter > F::zero()) {
        return Err(Error::InvalidScores("degenerate scale".into()));
    }
    let z = (score - scale.midpoint()) / quarter;
    Ok(F::one() / (F::one() + nalgebra::ComplexField::exp(-z)))
}
