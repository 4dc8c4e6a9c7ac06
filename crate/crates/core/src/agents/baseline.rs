use super::Prediction;
use crate::scalar::Scalar;

/// Beta-Bernoulli posterior per arm, starting from the uniform Beta(1, 1) prior.
///
/// Rewards in (0, 1) count as fractional successes; anything outside is clamped.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct BetaArms {
    successes: Vec<f64>,
    failures: Vec<f64>,
}

impl BetaArms {
    pub(super) fn new(n: usize) -> Self {
        Self { successes: vec![0.0; n], failures: vec![0.0; n] }
    }

    pub(super) fn record(&mut self, arm: usize, reward: f64) {
        let r = reward.clamp(0.0, 1.0);
        self.successes[arm] += r;
        self.failures[arm] += 1.0 - r;
    }

    pub(super) fn posterior(&self, arm: usize) -> (f64, f64) {
        (1.0 + self.successes[arm], 1.0 + self.failures[arm])
    }

    pub(super) fn prediction<F: Scalar>(&self, arm: usize) -> Prediction<F> {
        let (a, b) = self.posterior(arm);
        let total = a + b;
        let var = a * b / (total * total * (total + 1.0));
        Prediction { mean: F::lit(a / total), standard_deviation: F::lit(var.sqrt()) }
    }
}
