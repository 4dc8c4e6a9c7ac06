//! Closed-form predictions of a Gaussian-process student trained on one set
//! of actions and evaluated on another, and the error caused by a student
//! kernel that differs from the teacher's.
//!
//! The general linear solve [`gp_mean_general`] is the reference every closed
//! form is checked against. No jitter or noise is added anywhere here.

mod checks;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use checks::{run_theory_checks, CheckRow, TheoryReport};

/// `K*ᵀ K⁻¹ y` with `K` the n×n train covariance and `K*` the n×m train/test covariance.
pub fn gp_mean_general<F: Scalar>(k: &DMatrix<F>, k_star: &DMatrix<F>, y: &DVector<F>) -> Result<DVector<F>> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: k.ncols() });
    }
    if k_star.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: k_star.nrows() });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    let weights = k.clone().lu().solve(y).ok_or_else(|| Error::Singular("train covariance".into()))?;
    if weights.iter().any(|w| !w.finite()) {
        return Err(Error::Singular("train covariance".into()));
    }
    Ok(k_star.transpose() * weights)
}

/// Two training actions and one test action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTrainSpec<F> {
    /// Covariance of each training action with the test action.
    pub c0_g: F,
    pub c1_g: F,
    /// Covariance between the two training actions.
    pub c_p: F,
    pub sigma0_sq: F,
    pub sigma1_sq: F,
    pub y0: F,
    pub y1: F,
}

impl<F: Scalar> TwoTrainSpec<F> {
    /// Equal test covariances and equal variances.
    pub fn symmetric(c_g: F, c_p: F, sigma_sq: F, y0: F, y1: F) -> Self {
        Self { c0_g: c_g, c1_g: c_g, c_p, sigma0_sq: sigma_sq, sigma1_sq: sigma_sq, y0, y1 }
    }

    pub fn determinant(&self) -> F {
        self.sigma0_sq * self.sigma1_sq - self.c_p * self.c_p
    }

    pub fn train_covariance(&self) -> DMatrix<F> {
        DMatrix::from_row_slice(2, 2, &[self.sigma0_sq, self.c_p, self.c_p, self.sigma1_sq])
    }

    pub fn cross_covariance(&self) -> DMatrix<F> {
        DMatrix::from_column_slice(2, 1, &[self.c0_g, self.c1_g])
    }

    pub fn targets(&self) -> DVector<F> {
        DVector::from_column_slice(&[self.y0, self.y1])
    }

    fn require_symmetric(&self) -> Result<(F, F)> {
        if self.c0_g != self.c1_g || self.sigma0_sq != self.sigma1_sq {
            return Err(Error::InvalidConfig("needs equal test covariances and equal variances".into()));
        }
        Ok((self.c0_g, self.sigma0_sq))
    }
}

/// The expanded 2×2 prediction
/// `(c₀y₀σ₁² − c₀y₁cᵖ + c₁y₁σ₀² − c₁y₀cᵖ) / (σ₀²σ₁² − (cᵖ)²)`.
pub fn two_train_prediction<F: Scalar>(spec: &TwoTrainSpec<F>) -> Result<F> {
    let det = spec.determinant();
    if det == F::zero() || !det.finite() {
        return Err(Error::Singular("σ₀²σ₁² − (cᵖ)² is zero".into()));
    }
    let s = spec;
    let numerator = s.c0_g * s.y0 * s.sigma1_sq - s.c0_g * s.y1 * s.c_p + s.c1_g * s.y1 * s.sigma0_sq
        - s.c1_g * s.y0 * s.c_p;
    Ok(numerator / det)
}

/// Prediction error when the student's train/test covariance is off by `epsilon`:
/// `|ε (y₀ + y₁) / (σ² + cᵖ)|`. Needs the symmetric case.
pub fn error_kstar<F: Scalar>(epsilon: F, spec: &TwoTrainSpec<F>) -> Result<F> {
    let (_, sigma_sq) = spec.require_symmetric()?;
    let denom = sigma_sq + spec.c_p;
    if denom == F::zero() {
        return Err(Error::Singular("σ² + cᵖ is zero".into()));
    }
    Ok((epsilon * (spec.y0 + spec.y1) / denom).magnitude())
}

/// Prediction error when the student's train/train covariance is `cᵖ + ε`:
/// `|ε cᵍ (y₀ + y₁) / ((σ² + cᵖ)(σ² + cᵖ + ε))|`. Needs the symmetric case.
pub fn error_k<F: Scalar>(epsilon: F, spec: &TwoTrainSpec<F>) -> Result<F> {
    let (c_g, sigma_sq) = spec.require_symmetric()?;
    let teacher = sigma_sq + spec.c_p;
    let student = teacher + epsilon;
    if teacher == F::zero() || student == F::zero() {
        return Err(Error::Singular("σ² + cᵖ is zero".into()));
    }
    Ok((epsilon * c_g * (spec.y0 + spec.y1) / (teacher * student)).magnitude())
}

/// Valid range check for `(1 − c)I + c·eeᵀ` to be positive definite.
fn check_equicorrelated<F: Scalar>(n: usize, c_p: F) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one training action".into()));
    }
    let lower = if n > 1 { -F::one() / F::from_count(n - 1) } else { -F::one() };
    if !(c_p > lower && c_p < F::one()) {
        return Err(Error::InvalidConfig(format!("c_p = {c_p} leaves the positive-definite range ({lower}, 1)")));
    }
    Ok(())
}

/// `(1 − c)I + c·eeᵀ`.
pub fn equicorrelated_matrix<F: Scalar>(n: usize, c_p: F) -> DMatrix<F> {
    DMatrix::from_fn(n, n, |i, j| if i == j { F::one() } else { c_p })
}

/// Sherman–Morrison inverse `(1 − c)⁻¹ (I − c / (1 + (n − 1)c) · eeᵀ)`.
pub fn equicorrelated_inverse<F: Scalar>(n: usize, c_p: F) -> Result<DMatrix<F>> {
    check_equicorrelated(n, c_p)?;
    let scale = F::one() / (F::one() - c_p);
    let rank_one = c_p / (F::one() + F::from_count(n - 1) * c_p);
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j { F::one() } else { F::zero() };
        scale * (identity - rank_one)
    }))
}

/// Equicorrelated training set with a constant train/test covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EquicorrelatedSpec<F> {
    pub n_train: usize,
    pub m_test: usize,
    pub c_p: F,
    pub c_g: F,
    pub y_p: Vec<F>,
}

impl<F: Scalar> EquicorrelatedSpec<F> {
    pub fn validate(&self) -> Result<()> {
        check_equicorrelated(self.n_train, self.c_p)?;
        if self.y_p.len() != self.n_train {
            return Err(Error::DimensionMismatch { expected: self.n_train, found: self.y_p.len() });
        }
        if self.m_test == 0 {
            return Err(Error::InvalidConfig("need at least one test action".into()));
        }
        Ok(())
    }
}

/// Test predictions for an equicorrelated spec, evaluated by the general solve.
pub fn equicorrelated_prediction<F: Scalar>(spec: &EquicorrelatedSpec<F>) -> Result<DVector<F>> {
    spec.validate()?;
    let k = equicorrelated_matrix(spec.n_train, spec.c_p);
    let k_star = DMatrix::from_element(spec.n_train, spec.m_test, spec.c_g);
    gp_mean_general(&k, &k_star, &DVector::from_column_slice(&spec.y_p))
}

/// Closed form of every component of [`equicorrelated_prediction`]:
/// `cᵍ Σy / (1 + (n − 1)cᵖ)`.
pub fn equicorrelated_closed_form<F: Scalar>(spec: &EquicorrelatedSpec<F>) -> Result<F> {
    spec.validate()?;
    let total = spec.y_p.iter().fold(F::zero(), |a, &b| a + b);
    Ok(spec.c_g * total / (F::one() + F::from_count(spec.n_train - 1) * spec.c_p))
}

/// Empirical exceedance frequency and the Chebyshev bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevOutcome {
    pub empirical: f64,
    pub bound: f64,
    pub trials: usize,
}

impl ChebyshevOutcome {
    /// Empirical frequency is at most the bound plus three binomial standard errors.
    pub fn within_bound(&self) -> bool {
        let p = self.bound.min(1.0);
        let se = (p * (1.0 - p) / self.trials as f64).sqrt();
        self.empirical <= self.bound + 3.0 * se
    }
}

/// Samples `(K_S, K_T)` from a zero-mean bivariate normal with common
/// variance `σ²` and correlation `ρ₀` and counts how often
/// `|K_S − K_T| > cσ√(2(1 − ρ₀))`; the bound is `1/c²`.
pub fn chebyshev_check<R: Rng + ?Sized>(rho0: f64, sigma: f64, c: f64, trials: usize, rng: &mut R) -> Result<ChebyshevOutcome> {
    if !(-1.0..=1.0).contains(&rho0) {
        return Err(Error::InvalidConfig(format!("correlation {rho0} outside [-1, 1]")));
    }
    if !(c > 0.0) || !(sigma > 0.0) || trials == 0 {
        return Err(Error::InvalidConfig("need c > 0, sigma > 0 and at least one trial".into()));
    }
    let threshold = c * sigma * (2.0 * (1.0 - rho0)).sqrt();
    let orth = (1.0 - rho0 * rho0).sqrt();
    let mut exceed = 0usize;
    for _ in 0..trials {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let teacher = sigma * z1;
        let student = sigma * (rho0 * z1 + orth * z2);
        if (student - teacher).abs() > threshold {
            exceed += 1;
        }
    }
    Ok(ChebyshevOutcome { empirical: exceed as f64 / trials as f64, bound: 1.0 / (c * c), trials })
}

/// A formula for the prediction error as a function of ε.
pub type ErrorFormula<'a, F> = &'a dyn Fn(F, &TwoTrainSpec<F>) -> Result<F>;

/// Violations found by [`monotonicity_scan`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanReport {
    pub specs: usize,
    pub violations: Vec<String>,
}

impl ScanReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks both error formulas are non-decreasing in ε and that the train/test
/// error dominates the train/train error at every grid point.
pub fn monotonicity_scan<F: Scalar>(specs: &[TwoTrainSpec<F>], grid: &[F]) -> ScanReport {
    monotonicity_scan_with(specs, grid, &error_kstar, &error_k)
}

pub fn monotonicity_scan_with<F: Scalar>(
    specs: &[TwoTrainSpec<F>],
    grid: &[F],
    kstar: ErrorFormula<'_, F>,
    k: ErrorFormula<'_, F>,
) -> ScanReport {
    let slack = F::lit(1e-12);
    let mut violations = Vec::new();
    for (s, spec) in specs.iter().enumerate() {
        let mut prev: Option<(F, F, F)> = None;
        for &eps in grid {
            let (a, b) = match (kstar(eps, spec), k(eps, spec)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    violations.push(format!("spec {s}, ε={eps}: {e}"));
                    continue;
                }
            };
            if eps == F::zero() && (a != F::zero() || b != F::zero()) {
                violations.push(format!("spec {s}: errors at ε=0 are {a} and {b}"));
            }
            if b > a + slack * (F::one() + a) {
                violations.push(format!("spec {s}, ε={eps}: train/train error {b} exceeds train/test error {a}"));
            }
            if let Some((pe, pa, pb)) = prev {
                if eps > pe && (a + slack < pa || b + slack < pb) {
                    violations.push(format!("spec {s}, ε={eps}: error decreased"));
                }
            }
            prev = Some((eps, a, b));
        }
    }
    ScanReport { specs: specs.len(), violations }
}

/// Random symmetric specs with non-negative covariances: `σ² ∈ [0.5, 2]`,
/// `cᵖ ∈ [0, 0.9σ²)`, `cᵍ ∈ [0, σ²]`, targets in [−3, 3].
pub fn random_symmetric_specs<F: Scalar, R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<TwoTrainSpec<F>> {
    (0..count)
        .map(|_| {
            let sigma_sq = rng.random_range(0.5..2.0);
            let c_p = rng.random_range(0.0..0.9) * sigma_sq;
            let c_g = rng.random_range(0.0..=1.0) * sigma_sq;
            let y0 = rng.random_range(-3.0..3.0);
            let y1 = rng.random_range(-3.0..3.0);
            TwoTrainSpec::symmetric(F::lit(c_g), F::lit(c_p), F::lit(sigma_sq), F::lit(y0), F::lit(y1))
        })
        .collect()
}

/// Default ε grid `{0, 0.05, …, 0.5}`.
pub fn default_epsilon_grid<F: Scalar>() -> Vec<F> {
    (0..=10).map(|i| F::lit(i as f64 * 0.05)).collect()
}
