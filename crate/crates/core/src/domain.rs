//! Core data types shared by the kernels, agents and simulations.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default eigenvalue floor used when repairing a kernel into a PSD matrix.
pub const DEFAULT_PSD_FLOOR: f64 = 1e-8;

/// Ordered catalog of textual action descriptions. Ids are the positions `0..N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    descriptions: Vec<String>,
}

impl ActionSet {
    pub fn new(descriptions: Vec<String>) -> Result<Self> {
        if descriptions.is_empty() {
            return Err(Error::InvalidActions("no actions".into()));
        }
        if let Some(id) = descriptions.iter().position(|d| d.trim().is_empty()) {
            return Err(Error::InvalidActions(format!("action {id} has an empty description")));
        }
        Ok(Self { descriptions })
    }

    /// Builds a set from explicit `(id, description)` pairs, which must list ids `0..N` in order.
    pub fn from_pairs(pairs: Vec<(usize, String)>) -> Result<Self> {
        let mut descriptions = Vec::with_capacity(pairs.len());
        for (expected, (id, text)) in pairs.into_iter().enumerate() {
            if id != expected {
                return Err(Error::InvalidActions(format!(
                    "expected id {expected}, found {id}"
                )));
            }
            descriptions.push(text);
        }
        Self::new(descriptions)
    }

    pub fn len(&self) -> usize {
        self.descriptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptions.is_empty()
    }

    pub fn description(&self, id: usize) -> Option<&str> {
        self.descriptions.get(id).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.descriptions.iter().map(String::as_str).enumerate()
    }

    /// Description lengths in characters.
    pub fn lengths(&self) -> Vec<usize> {
        self.descriptions.iter().map(|d| d.chars().count()).collect()
    }
}

/// Bounds of a value scale and the threshold below which an action counts as bad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueScale<F> {
    pub min: F,
    pub max: F,
    pub bad_threshold: F,
}

impl<F: Scalar> ValueScale<F> {
    pub fn new(min: F, max: F, bad_threshold: F) -> Result<Self> {
        if !(min.finite() && max.finite() && min < max) {
            return Err(Error::InvalidScores(format!("scale [{min}, {max}] is degenerate")));
        }
        if !(bad_threshold >= min && bad_threshold <= max) {
            return Err(Error::InvalidScores(format!(
                "bad threshold {bad_threshold} outside [{min}, {max}]"
            )));
        }
        Ok(Self { min, max, bad_threshold })
    }

    /// The 0..100 human rating scale with bad threshold 50.
    pub fn human() -> Self {
        Self { min: F::lit(0.0), max: F::lit(100.0), bad_threshold: F::lit(50.0) }
    }

    /// The synthetic [-3, 3] morality scale with bad threshold 0.
    pub fn synthetic() -> Self {
        Self { min: F::lit(-3.0), max: F::lit(3.0), bad_threshold: F::lit(0.0) }
    }

    pub fn range(&self) -> F {
        self.max - self.min
    }

    pub fn midpoint(&self) -> F {
        (self.min + self.max) * F::lit(0.5)
    }

    pub fn contains(&self, x: F) -> bool {
        x >= self.min && x <= self.max
    }
}

/// Per-action scores for one value dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueScores<F> {
    value_name: String,
    scores: Vec<F>,
    scale: ValueScale<F>,
}

impl<F: Scalar> ValueScores<F> {
    pub fn new(value_name: impl Into<String>, scores: Vec<F>, scale: ValueScale<F>) -> Result<Self> {
        let scale = ValueScale::new(scale.min, scale.max, scale.bad_threshold)?;
        if scores.is_empty() {
            return Err(Error::InvalidScores("no scores".into()));
        }
        if let Some((id, s)) = scores.iter().enumerate().find(|(_, s)| !scale.contains(**s)) {
            return Err(Error::InvalidScores(format!(
                "score {s} for action {id} outside [{}, {}]",
                scale.min, scale.max
            )));
        }
        Ok(Self { value_name: value_name.into(), scores, scale })
    }

    pub fn value_name(&self) -> &str {
        &self.value_name
    }

    pub fn scores(&self) -> &[F] {
        &self.scores
    }

    pub fn score(&self, id: usize) -> F {
        self.scores[id]
    }

    pub fn scale(&self) -> &ValueScale<F> {
        &self.scale
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn is_bad(&self, id: usize) -> bool {
        self.scores[id] < self.scale.bad_threshold
    }

    /// Same scores under a different bad threshold.
    pub fn with_bad_threshold(mut self, threshold: F) -> Self {
        self.scale.bad_threshold = threshold;
        self
    }
}

/// Where a similarity matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthetic,
    File,
    Derived,
}

/// Symmetric pairwise-similarity kernel over the action catalog.
///
/// Construction does not enforce the kernel invariants; [`validate_kernel`]
/// reports them and [`SimilarityMatrix::checked`] rejects violations.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<F: Scalar> {
    entries: DMatrix<F>,
    provenance: Provenance,
}

impl<F: Scalar> SimilarityMatrix<F> {
    pub fn from_matrix(entries: DMatrix<F>, provenance: Provenance) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidKernel("empty matrix".into()));
        }
        Ok(Self { entries, provenance })
    }

    /// Builds a matrix and fails on the first invariant violation.
    pub fn checked(entries: DMatrix<F>, provenance: Provenance) -> Result<Self> {
        let m = Self::from_matrix(entries, provenance)?;
        let problems = validate_kernel(&m);
        if problems.is_empty() {
            Ok(m)
        } else {
            Err(Error::InvalidKernel(problems.join("; ")))
        }
    }

    pub fn from_fn(n: usize, provenance: Provenance, f: impl FnMut(usize, usize) -> F) -> Result<Self> {
        Self::from_matrix(DMatrix::from_fn(n, n, f), provenance)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<F> {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Affine rescale of all entries to [0, 1] by the global min/max, then diagonal set to 1.
    pub fn normalized(&self) -> Result<Self> {
        let lo = self.entries.min();
        let hi = self.entries.max();
        let span = hi - lo;
        if !(span > F::zero()) || !span.finite() {
            return Err(Error::InvalidKernel("cannot normalize a constant or non-finite matrix".into()));
        }
        let mut out = self.entries.map(|x| (x - lo) / span);
        out.fill_diagonal(F::one());
        Ok(Self { entries: out, provenance: Provenance::Derived })
    }

    /// `(m + mᵀ)/2` together with the largest asymmetry seen.
    pub fn symmetrized(&self) -> (Self, F) {
        let asym = max_asymmetry(&self.entries);
        let half = F::lit(0.5);
        let n = self.n();
        let out = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (self.entries[(i, j)], self.entries[(j, i)]);
            if a == b {
                a
            } else {
                (a + b) * half
            }
        });
        (Self { entries: out, provenance: self.provenance }, asym)
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_eigenvalue(&self) -> Result<F> {
        let (sym, _) = self.symmetrized();
        if sym.entries.iter().any(|x| !x.finite()) {
            return Err(Error::Eigen("non-finite entries".into()));
        }
        let eig = SymmetricEigen::new(sym.entries);
        Ok(eig.eigenvalues.min())
    }

    /// Restriction to the given ids, in the given order.
    pub fn submatrix(&self, ids: &[usize]) -> DMatrix<F> {
        DMatrix::from_fn(ids.len(), ids.len(), |a, b| self.entries[(ids[a], ids[b])])
    }
}

fn max_asymmetry<F: Scalar>(m: &DMatrix<F>) -> F {
    let n = m.nrows();
    let mut worst = F::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (m[(i, j)] - m[(j, i)]).magnitude();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Lists every violated kernel invariant. Empty means the matrix is a valid kernel.
pub fn validate_kernel<F: Scalar>(m: &SimilarityMatrix<F>) -> Vec<String> {
    let e = &m.entries;
    let n = m.n();
    let mut problems = Vec::new();

    let non_finite = e.iter().filter(|x| !x.finite()).count();
    if non_finite > 0 {
        problems.push(format!("{non_finite} non-finite entries"));
        return problems;
    }

    let asym = max_asymmetry(e);
    if asym > F::zero() {
        problems.push(format!("not symmetric: max |m[i][j] - m[j][i]| = {:e}", asym.as_f64()));
    }

    let bad_rows: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| e[(i, j)] > e[(i, i)]))
        .collect();
    if !bad_rows.is_empty() {
        problems.push(format!("diagonal is not the row maximum in rows {bad_rows:?}"));
    }
    problems
}

/// Eigenvalue clipping repair: returns the matrix with every eigenvalue raised to at least `floor`.
///
/// Inputs whose smallest eigenvalue already clears the floor are returned unchanged.
pub fn nearest_psd<F: Scalar>(m: &SimilarityMatrix<F>, floor: F) -> Result<SimilarityMatrix<F>> {
    if m.entries.iter().any(|x| !x.finite()) {
        return Err(Error::Eigen("non-finite entries".into()));
    }
    let (sym, _) = m.symmetrized();
    let eig = SymmetricEigen::new(sym.entries.clone());
    if eig.eigenvalues.min() >= floor {
        return Ok(SimilarityMatrix { entries: sym.entries, provenance: m.provenance });
    }
    let clipped = eig.eigenvalues.map(|l| if l < floor { floor } else { l });
    let q = &eig.eigenvectors;
    let rebuilt = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    let half = F::lit(0.5);
    let out = (&rebuilt + rebuilt.transpose()) * half;
    Ok(SimilarityMatrix { entries: out, provenance: Provenance::Derived })
}

/// Partition of the action ids into a personalization half and a generalization half.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SplitSpec {
    personalization: Vec<usize>,
    generalization: Vec<usize>,
}

impl SplitSpec {
    /// Both id lists are sorted; they must be disjoint and cover `0..n`.
    pub fn new(mut personalization: Vec<usize>, mut generalization: Vec<usize>, n: usize) -> Result<Self> {
        personalization.sort_unstable();
        generalization.sort_unstable();
        let mut seen = vec![false; n];
        for &id in personalization.iter().chain(&generalization) {
            if id >= n {
                return Err(Error::InvalidConfig(format!("split id {id} out of range for {n} actions")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::InvalidConfig(format!("split id {id} appears twice")));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidConfig(format!("split does not cover id {missing}")));
        }
        Ok(Self { personalization, generalization })
    }

    pub fn personalization(&self) -> &[usize] {
        &self.personalization
    }

    pub fn generalization(&self) -> &[usize] {
        &self.generalization
    }

    pub fn n(&self) -> usize {
        self.personalization.len() + self.generalization.len()
    }
}

/// Uniformly random split into ⌊n/2⌋ personalization and ⌈n/2⌉ generalization ids.
pub fn split_random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SplitSpec> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("cannot split {n} actions")));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let generalization = ids.split_off(n / 2);
    SplitSpec::new(ids, generalization, n)
}

/// Outcome of one personalization or generalization phase.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics<F> {
    pub steps: usize,
    pub mean_reward: F,
    pub bad_actions: usize,
    pub non_optimal_actions: usize,
    pub unique_actions: usize,
    pub iterations_to_convergence: Option<usize>,
    pub converged: bool,
    pub alignment: Option<F>,
}
