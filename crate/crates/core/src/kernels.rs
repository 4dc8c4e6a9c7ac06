//! Kernel construction from scalar scores, score corruption, interpolation
//! toward a reference kernel, and the description-length control kernel.

use rand::seq::index;
use rand::Rng;

use crate::domain::{ActionSet, Provenance, SimilarityMatrix, ValueScale, ValueScores};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How many scores to resample and the bounds replacements are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec<F> {
    pub k: usize,
    pub replacement_low: F,
    pub replacement_high: F,
}

impl<F: Scalar> CorruptionSpec<F> {
    /// Corrupt `k` actions with replacements drawn over the whole scale.
    pub fn over_scale(k: usize, scale: &ValueScale<F>) -> Self {
        Self { k, replacement_low: scale.min, replacement_high: scale.max }
    }
}

/// `1 - |s_i - s_j| / (max - min)`: identical scores are maximally similar,
/// opposite ends of the scale have similarity 0.
pub fn score_kernel<F: Scalar>(scores: &ValueScores<F>) -> Result<SimilarityMatrix<F>> {
    let range = scores.scale().range();
    if !(range > F::zero()) {
        return Err(Error::InvalidScores("degenerate scale".into()));
    }
    let s = scores.scores();
    SimilarityMatrix::from_fn(s.len(), Provenance::Synthetic, |i, j| {
        if i == j {
            F::one()
        } else {
            F::one() - (s[i] - s[j]).magnitude() / range
        }
    })
}

fn uniform<F: Scalar, R: Rng + ?Sized>(rng: &mut R, low: F, high: F) -> F {
    let u: f64 = rng.random();
    low + (high - low) * F::lit(u)
}

/// Scores drawn independently and uniformly over the scale.
pub fn random_scores<F: Scalar, R: Rng + ?Sized>(
    value_name: &str,
    n: usize,
    scale: ValueScale<F>,
    rng: &mut R,
) -> Result<ValueScores<F>> {
    let scores = (0..n).map(|_| uniform(rng, scale.min, scale.max)).collect();
    ValueScores::new(value_name, scores, scale)
}

/// Resamples the scores of exactly `spec.k` distinct, uniformly chosen actions.
pub fn corrupt_scores<F: Scalar, R: Rng + ?Sized>(
    scores: &ValueScores<F>,
    spec: &CorruptionSpec<F>,
    rng: &mut R,
) -> Result<ValueScores<F>> {
    let n = scores.len();
    if spec.k > n {
        return Err(Error::InvalidConfig(format!("cannot corrupt {} of {n} actions", spec.k)));
    }
    let scale = *scores.scale();
    if !(spec.replacement_low <= spec.replacement_high)
        || !scale.contains(spec.replacement_low)
        || !scale.contains(spec.replacement_high)
    {
        return Err(Error::InvalidConfig("replacement bounds must lie within the value scale".into()));
    }
    let mut out = scores.scores().to_vec();
    let mut chosen = index::sample(rng, n, spec.k).into_vec();
    chosen.sort_unstable();
    for id in chosen {
        out[id] = uniform(rng, spec.replacement_low, spec.replacement_high);
    }
    ValueScores::new(scores.value_name(), out, scale)
}

/// Elementwise `(1 - alpha) * base + alpha * target`.
pub fn interpolate_kernel<F: Scalar>(
    base: &SimilarityMatrix<F>,
    target: &SimilarityMatrix<F>,
    alpha: F,
) -> Result<SimilarityMatrix<F>> {
    if base.n() != target.n() {
        return Err(Error::DimensionMismatch { expected: base.n(), found: target.n() });
    }
    if !(alpha >= F::zero() && alpha <= F::one()) {
        return Err(Error::InvalidConfig(format!("interpolation weight {alpha} outside [0, 1]")));
    }
    if alpha == F::zero() {
        return Ok(base.clone());
    }
    if alpha == F::one() {
        return Ok(target.clone());
    }
    let keep = F::one() - alpha;
    let entries = base.entries() * keep + target.entries() * alpha;
    SimilarityMatrix::from_matrix(entries, Provenance::Derived)
}

/// `M - |len(a) - len(b)|` with `M` the longest description, before normalization.
pub fn raw_length_kernel<F: Scalar>(actions: &ActionSet) -> Result<SimilarityMatrix<F>> {
    let lengths = actions.lengths();
    let longest = lengths.iter().copied().max().unwrap_or(0);
    SimilarityMatrix::from_fn(actions.len(), Provenance::Derived, |i, j| {
        F::from_count(longest) - F::from_count(lengths[i].abs_diff(lengths[j]))
    })
}

/// Length kernel rescaled to [0, 1] with unit diagonal.
pub fn length_kernel<F: Scalar>(actions: &ActionSet) -> Result<SimilarityMatrix<F>> {
    let raw = raw_length_kernel(actions)?;
    if actions.len() == 1 {
        return SimilarityMatrix::from_fn(1, Provenance::Derived, |_, _| F::one());
    }
    match raw.normalized() {
        Ok(m) => Ok(m),
        // every description has the same length: all pairs are maximally similar
        Err(_) => SimilarityMatrix::from_fn(actions.len(), Provenance::Derived, |_, _| F::one()),
    }
}

/// Description lengths rescaled to the 0..100 scale, bad threshold 50.
pub fn length_scores<F: Scalar>(actions: &ActionSet) -> Result<ValueScores<F>> {
    let lengths = actions.lengths();
    let lo = *lengths.iter().min().ok_or_else(|| Error::InvalidActions("no actions".into()))?;
    let hi = *lengths.iter().max().unwrap_or(&lo);
    if hi == lo {
        return Err(Error::InvalidScores("all descriptions have the same length".into()));
    }
    let span = F::from_count(hi - lo);
    let hundred = F::lit(100.0);
    let scores = lengths
        .iter()
        .map(|&l| F::from_count(l - lo) / span * hundred)
        .collect();
    ValueScores::new("length", scores, ValueScale::human())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_kernel;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn synth(scores: Vec<f64>) -> ValueScores<f64> {
        ValueScores::new("m", scores, ValueScale::synthetic()).unwrap()
    }

    #[test]
    fn score_kernel_endpoints_and_formula() {
        assert_eq!(score_kernel(&synth(vec![-3.0, -3.0])).unwrap().get(0, 1), 1.0);
        assert_eq!(score_kernel(&synth(vec![-3.0, 3.0])).unwrap().get(0, 1), 0.0);
        let k = score_kernel(&synth(vec![0.0, 1.5, 3.0])).unwrap();
        // 1 - 1.5/6, 1 - 3/6, 1 - 1.5/6
        assert!((k.get(0, 1) - 0.75).abs() < 1e-15);
        assert!((k.get(0, 2) - 0.5).abs() < 1e-15);
        assert!((k.get(1, 2) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn corrupting_zero_is_identity() {
        let s = synth(vec![0.1, -2.0, 2.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = CorruptionSpec::over_scale(0, s.scale());
        assert_eq!(corrupt_scores(&s, &spec, &mut rng).unwrap(), s);
    }

    #[test]
    fn corrupting_all_stays_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_scores("m", 50, ValueScale::synthetic(), &mut rng).unwrap();
        let spec = CorruptionSpec { k: 50, replacement_low: -1.0, replacement_high: 1.0 };
        let c = corrupt_scores(&s, &spec, &mut rng).unwrap();
        assert!(c.scores().iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn corrupting_ten_of_fifty_leaves_forty() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_scores::<f64, _>("m", 50, ValueScale::synthetic(), &mut rng).unwrap();
            let spec = CorruptionSpec::over_scale(10, s.scale());
            let c = corrupt_scores(&s, &spec, &mut rng).unwrap();
            let same = s.scores().iter().zip(c.scores()).filter(|(a, b)| a.to_bits() == b.to_bits()).count();
            assert_eq!(same, 40);
        }
    }

    #[test]
    fn corrupting_too_many_fails() {
        let s = synth(vec![0.0, 1.0]);
        let spec = CorruptionSpec::over_scale(3, s.scale());
        assert!(corrupt_scores(&s, &spec, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let base = SimilarityMatrix::from_fn(3, Provenance::Synthetic, |i, j| if i == j { 1.0 } else { 0.2 }).unwrap();
        let target = SimilarityMatrix::from_fn(3, Provenance::Synthetic, |i, j| if i == j { 1.0 } else { 0.6 }).unwrap();
        assert_eq!(interpolate_kernel(&base, &target, 0.0).unwrap(), base);
        assert_eq!(interpolate_kernel(&base, &target, 1.0).unwrap(), target);
        let mid: SimilarityMatrix<f64> = interpolate_kernel(&base, &target, 0.5).unwrap();
        assert!((mid.get(0, 2) - 0.4).abs() < 1e-15);
        let small = SimilarityMatrix::from_fn(2, Provenance::Synthetic, |_, _| 1.0).unwrap();
        assert!(interpolate_kernel(&base, &small, 0.5).is_err());
    }

    #[test]
    fn length_kernel_formula() {
        let a = ActionSet::new(vec!["x".repeat(10), "y".repeat(30), "z".repeat(10)]).unwrap();
        let raw = raw_length_kernel::<f64>(&a).unwrap();
        assert_eq!(raw.get(0, 2), 30.0);
        assert_eq!(raw.get(0, 1), 10.0);
        let k = length_kernel::<f64>(&a).unwrap();
        assert!(validate_kernel(&k).is_empty());
        assert_eq!(k.get(0, 2), 1.0);
        assert_eq!(k.get(0, 1), 0.0);
    }

    #[test]
    fn length_scores_rescale() {
        let a = ActionSet::new(vec!["a".repeat(10), "b".repeat(40), "c".repeat(20)]).unwrap();
        let s = length_scores::<f64>(&a).unwrap();
        assert_eq!(s.score(0), 0.0);
        assert_eq!(s.score(1), 100.0);
        assert!((s.score(2) - (20.0 - 10.0) / 30.0 * 100.0).abs() < 1e-12);
        assert_eq!(s.scale().bad_threshold, 50.0);
        let flat = ActionSet::new(vec!["ab".into(), "cd".into()]).unwrap();
        assert!(length_scores::<f64>(&flat).is_err());
    }

    proptest! {
        #[test]
        fn score_kernel_is_always_valid(scores in prop::collection::vec(-3.0f64..=3.0, 2..40)) {
            let k = score_kernel(&synth(scores)).unwrap();
            prop_assert!(validate_kernel(&k).is_empty());
        }

        #[test]
        fn length_kernel_is_always_valid(lens in prop::collection::vec(1usize..80, 1..20)) {
            let a = ActionSet::new(lens.iter().map(|&l| "w".repeat(l)).collect()).unwrap();
            let k = length_kernel::<f64>(&a).unwrap();
            prop_assert!(validate_kernel(&k).is_empty());
        }
    }
}
