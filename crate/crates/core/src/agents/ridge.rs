use nalgebra::{DMatrix, DVector};

use super::{AgentConfig, ObservationStore};
use crate::domain::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Kernel ridge regression on per-action mean rewards: `k*ᵀ (K + λI)⁻¹ ȳ`.
#[derive(Debug, Clone)]
pub(super) struct RidgeFit<F: Scalar> {
    ids: Vec<usize>,
    coefficients: DVector<F>,
    center: F,
}

impl<F: Scalar> RidgeFit<F> {
    pub(super) fn new(
        kernel: &SimilarityMatrix<F>,
        store: &ObservationStore<F>,
        config: &AgentConfig<F>,
        center: F,
    ) -> Result<Self> {
        let ids = store.observed();
        let mut system: DMatrix<F> = kernel.submatrix(&ids);
        for i in 0..ids.len() {
            system[(i, i)] += config.ridge_lambda;
        }
        let targets = DVector::from_iterator(ids.len(), ids.iter().map(|&a| store.mean(a).unwrap() - center));
        let coefficients = match system.clone().cholesky() {
            Some(chol) => chol.solve(&targets),
            None => system
                .lu()
                .solve(&targets)
                .ok_or_else(|| Error::Singular("kernel ridge system".into()))?,
        };
        Ok(Self { ids, coefficients, center })
    }

    pub(super) fn mean(&self, kernel: &SimilarityMatrix<F>, target: usize) -> F {
        self.ids
            .iter()
            .zip(self.coefficients.iter())
            .fold(self.center, |acc, (&a, &c)| acc + kernel.get(target, a) * c)
    }
}
