//! Representational alignment: Spearman correlation between the pairwise
//! similarities of two kernels, plus the binning and permutation-test helpers
//! used to summarize campaigns.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{SimilarityMatrix, SplitSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which action pairs enter the alignment measurement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlignmentVariant {
    /// Every unordered pair of distinct actions.
    Full,
    /// Pairs with both actions in the personalization half.
    Pers(SplitSpec),
    /// Every (personalization, generalization) pair.
    Cross(SplitSpec),
}

impl AlignmentVariant {
    pub fn name(&self) -> &'static str {
        match self {
            AlignmentVariant::Full => "full",
            AlignmentVariant::Pers(_) => "pers",
            AlignmentVariant::Cross(_) => "cross",
        }
    }
}

/// Average ranks (1-based); tied values share the mean of the ranks they span.
pub fn average_ranks<F: Scalar>(values: &[F]) -> Vec<F> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![F::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let shared = F::from_count(start + 1 + end) * F::lit(0.5);
        for &idx in &order[start..end] {
            ranks[idx] = shared;
        }
        start = end;
    }
    ranks
}

fn pearson<F: Scalar>(x: &[F], y: &[F]) -> Option<F> {
    let n = F::from_count(x.len());
    let mx = x.iter().fold(F::zero(), |a, &b| a + b) / n;
    let my = y.iter().fold(F::zero(), |a, &b| a + b) / n;
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= F::zero() || syy <= F::zero() {
        return None;
    }
    let r = sxy / (sxx * syy).root();
    Some(nalgebra::RealField::clamp(r, -F::one(), F::one()))
}

fn check_pair<F: Scalar>(x: &[F], y: &[F]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("need at least 2 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.finite()) {
        return Err(Error::UndefinedCorrelation("non-finite input".into()));
    }
    Ok(())
}

/// Spearman rank correlation with average-rank tie handling.
///
/// A constant input makes the correlation undefined and is reported as an error.
pub fn spearman<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::UndefinedCorrelation("constant input vector".into()))
}

/// Observed Spearman correlation and its two-sided permutation p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationTest {
    pub rho: f64,
    pub p_value: f64,
    pub shuffles: usize,
}

/// Spearman correlation with a permutation p-value `(1 + #{|ρ*| ≥ |ρ|}) / (1 + shuffles)`.
pub fn spearman_permutation_test(x: &[f64], y: &[f64], shuffles: usize, seed: u64) -> Result<PermutationTest> {
    check_pair(x, y)?;
    let rx = average_ranks(x);
    let mut ry = average_ranks(y);
    let rho = pearson(&rx, &ry).ok_or_else(|| Error::UndefinedCorrelation("constant input vector".into()))?;
    let threshold = rho.abs() - 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..shuffles {
        ry.shuffle(&mut rng);
        let r = pearson(&rx, &ry).unwrap_or(0.0);
        if r.abs() >= threshold {
            extreme += 1;
        }
    }
    Ok(PermutationTest {
        rho,
        p_value: (1 + extreme) as f64 / (1 + shuffles) as f64,
        shuffles,
    })
}

/// Pairwise similarities selected by the variant, in a fixed order.
///
/// `Full` walks the upper triangle row-major; `Pers` walks the upper triangle
/// of the personalization block; `Cross` orders by personalization id, then
/// generalization id.
pub fn pair_vector<F: Scalar>(m: &SimilarityMatrix<F>, variant: &AlignmentVariant) -> Result<Vec<F>> {
    let n = m.n();
    let check = |split: &SplitSpec| -> Result<()> {
        if split.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: split.n() });
        }
        Ok(())
    };
    let mut out = Vec::new();
    match variant {
        AlignmentVariant::Full => {
            for i in 0..n {
                for j in (i + 1)..n {
                    out.push(m.get(i, j));
                }
            }
        }
        AlignmentVariant::Pers(split) => {
            check(split)?;
            let ids = split.personalization();
            for (a, &i) in ids.iter().enumerate() {
                for &j in &ids[a + 1..] {
                    out.push(m.get(i, j));
                }
            }
        }
        AlignmentVariant::Cross(split) => {
            check(split)?;
            for &p in split.personalization() {
                for &g in split.generalization() {
                    out.push(m.get(p, g));
                }
            }
        }
    }
    Ok(out)
}

/// Spearman correlation between the selected pairwise similarities of two kernels.
pub fn alignment<F: Scalar>(
    a: &SimilarityMatrix<F>,
    b: &SimilarityMatrix<F>,
    variant: &AlignmentVariant,
) -> Result<F> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), found: b.n() });
    }
    spearman(&pair_vector(a, variant)?, &pair_vector(b, variant)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bin<F> {
    pub center: F,
    pub mean: F,
    pub standard_error: F,
    pub count: usize,
}

/// Metric means per alignment bin; empty bins are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSeries<F> {
    pub bin_width: F,
    pub bins: Vec<Bin<F>>,
}

/// Groups `(alignment, metric)` points by `⌊alignment / width⌋` and reports
/// each bin's mean and standard error (sample std / √count, 0 for a single point).
pub fn bin_series<F: Scalar>(points: &[(F, F)], bin_width: F) -> Result<BinnedSeries<F>> {
    if !(bin_width > F::zero()) {
        return Err(Error::InvalidConfig(format!("bin width {bin_width} must be positive")));
    }
    let mut groups: BTreeMap<i64, Vec<F>> = BTreeMap::new();
    for &(a, metric) in points {
        if !a.finite() || !metric.finite() {
            continue;
        }
        let idx = nalgebra::ComplexField::floor(a / bin_width).as_f64() as i64;
        groups.entry(idx).or_default().push(metric);
    }
    let half = F::lit(0.5);
    let bins = groups
        .into_iter()
        .map(|(idx, values)| {
            let count = values.len();
            let nf = F::from_count(count);
            let mean = values.iter().fold(F::zero(), |a, &b| a + b) / nf;
            let standard_error = if count < 2 {
                F::zero()
            } else {
                let ss = values.iter().fold(F::zero(), |a, &b| a + (b - mean) * (b - mean));
                (ss / F::from_count(count - 1)).root() / nf.root()
            };
            Bin {
                center: (F::lit(idx as f64) + half) * bin_width,
                mean,
                standard_error,
                count,
            }
        })
        .collect();
    Ok(BinnedSeries { bin_width, bins })
}
