use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{AgentConfig, ObservationStore, Prediction};
use crate::domain::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const JITTER_ESCALATIONS: usize = 8;

/// Gaussian-process posterior over per-action mean rewards.
///
/// Covariance is `s·K` with `s` the exploration variance; each observed
/// action contributes noise `noise_variance / count + jitter`.
#[derive(Debug, Clone)]
pub(super) struct GpFit<F: Scalar> {
    ids: Vec<usize>,
    chol: Cholesky<F, Dyn>,
    weights: DVector<F>,
    signal: F,
    center: F,
}

impl<F: Scalar> GpFit<F> {
    pub(super) fn new(
        kernel: &SimilarityMatrix<F>,
        store: &ObservationStore<F>,
        config: &AgentConfig<F>,
        center: F,
    ) -> Result<Self> {
        let ids = store.observed();
        let signal = config.exploration_variance;
        let base: DMatrix<F> = kernel.submatrix(&ids) * signal;
        let targets = DVector::from_iterator(ids.len(), ids.iter().map(|&a| store.mean(a).unwrap() - center));

        let mut jitter = config.jitter;
        for _ in 0..=JITTER_ESCALATIONS {
            let mut system = base.clone();
            for (row, &a) in ids.iter().enumerate() {
                system[(row, row)] += config.noise_variance / F::from_count(store.count(a)) + jitter;
            }
            if let Some(chol) = system.cholesky() {
                let weights = chol.solve(&targets);
                return Ok(Self { ids, chol, weights, signal, center });
            }
            jitter *= F::lit(10.0);
        }
        Err(Error::Cholesky { jitter: jitter.as_f64() })
    }

    pub(super) fn predict(&self, kernel: &SimilarityMatrix<F>, target: usize) -> Prediction<F> {
        let cross = DVector::from_iterator(self.ids.len(), self.ids.iter().map(|&a| kernel.get(target, a) * self.signal));
        let mean = self.center + cross.dot(&self.weights);
        let half = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&cross)
            .expect("cholesky factor has a positive diagonal");
        let mut variance = self.signal * kernel.get(target, target) - half.dot(&half);
        if !(variance > F::zero()) {
            variance = F::zero();
        }
        Prediction { mean, standard_deviation: variance.root() }
    }
}
