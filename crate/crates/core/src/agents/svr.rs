//! ε-insensitive support vector regression solved in the dual by pairwise
//! coordinate descent.
//!
//! With `β = α − α*` the dual is
//!
//! ```text
//! minimize   ½ βᵀKβ − yᵀβ + ε‖β‖₁
//! subject to Σβ = 0,  −C ≤ β ≤ C
//! ```
//!
//! Each step moves mass between the maximally KKT-violating pair `(i, j)`
//! (`β_i += t`, `β_j −= t`), which keeps `Σβ = 0`, and picks `t` by exact
//! minimization of the piecewise-quadratic restriction along that direction.

use nalgebra::DMatrix;

use super::{AgentConfig, ObservationStore};
use crate::domain::SimilarityMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrParams<F> {
    pub c: F,
    pub epsilon: F,
    pub tolerance: F,
    pub max_iterations: usize,
}

/// Dual solution over a set of training ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrFit<F> {
    pub ids: Vec<usize>,
    pub beta: Vec<F>,
    pub bias: F,
    pub converged: bool,
    pub iterations: usize,
    pub max_violation: F,
}

impl<F: Scalar> SvrFit<F> {
    /// `Σ β_i k(t, i) + b`, on the centered reward scale.
    pub fn decision(&self, kernel: &SimilarityMatrix<F>, target: usize) -> F {
        self.ids
            .iter()
            .zip(&self.beta)
            .fold(self.bias, |acc, (&a, &b)| acc + kernel.get(target, a) * b)
    }
}

/// `½ βᵀKβ − yᵀβ + ε‖β‖₁`.
pub fn dual_objective<F: Scalar>(k: &DMatrix<F>, y: &[F], beta: &[F], epsilon: F) -> F {
    let n = beta.len();
    let mut value = F::zero();
    for i in 0..n {
        let mut row = F::zero();
        for j in 0..n {
            row += k[(i, j)] * beta[j];
        }
        value += F::lit(0.5) * beta[i] * row - y[i] * beta[i] + epsilon * beta[i].magnitude();
    }
    value
}

/// Interval of admissible values for `y_i − f(x_i) + b` given where `β_i` sits in its box.
fn residual_bounds<F: Scalar>(beta: F, c: F, epsilon: F) -> (Option<F>, Option<F>) {
    let edge = c * F::lit(1e-12);
    if beta >= c - edge {
        (Some(epsilon), None)
    } else if beta <= -c + edge {
        (None, Some(-epsilon))
    } else if beta > F::zero() {
        (Some(epsilon), Some(epsilon))
    } else if beta < F::zero() {
        (Some(-epsilon), Some(-epsilon))
    } else {
        (Some(-epsilon), Some(epsilon))
    }
}

struct Kkt<F> {
    up: Option<(usize, F)>,
    down: Option<(usize, F)>,
}

fn kkt<F: Scalar>(u: &[F], beta: &[F], c: F, epsilon: F) -> Kkt<F> {
    let mut up: Option<(usize, F)> = None;
    let mut down: Option<(usize, F)> = None;
    for i in 0..u.len() {
        let (lo, hi) = residual_bounds(beta[i], c, epsilon);
        if let Some(hi) = hi {
            let v = u[i] - hi;
            if up.is_none_or(|(_, best)| v > best) {
                up = Some((i, v));
            }
        }
        if let Some(lo) = lo {
            let v = u[i] - lo;
            if down.is_none_or(|(_, best)| v < best) {
                down = Some((i, v));
            }
        }
    }
    Kkt { up, down }
}

/// Exact minimizer of `½ηt² + gt + ε(|a+t| − |a| + |b−t| − |b|)` over `[lo, hi]`.
fn line_minimize<F: Scalar>(eta: F, g: F, epsilon: F, a: F, b: F, lo: F, hi: F) -> F {
    let phi = |t: F| {
        F::lit(0.5) * eta * t * t + g * t
            + epsilon * ((a + t).magnitude() - a.magnitude() + (b - t).magnitude() - b.magnitude())
    };
    let mut knots = vec![lo, hi];
    for p in [-a, b] {
        if p > lo && p < hi {
            knots.push(p);
        }
    }
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    let mut candidates = knots.clone();
    if eta > F::zero() {
        for w in knots.windows(2) {
            let mid = (w[0] + w[1]) * F::lit(0.5);
            let si = if a + mid >= F::zero() { F::one() } else { -F::one() };
            let sj = if b - mid >= F::zero() { F::one() } else { -F::one() };
            let t = -(g + epsilon * (si - sj)) / eta;
            candidates.push(nalgebra::RealField::clamp(t, w[0], w[1]));
        }
    }
    let mut best = F::zero();
    let mut best_value = F::zero();
    for t in candidates {
        let v = phi(t);
        if v < best_value {
            best = t;
            best_value = v;
        }
    }
    best
}

/// Solves the dual for kernel `k` and targets `y`, optionally from a feasible warm start.
pub fn solve_dual<F: Scalar>(k: &DMatrix<F>, y: &[F], params: SvrParams<F>, warm: Option<&[F]>) -> (Vec<F>, F, bool, usize, F) {
    let n = y.len();
    let (c, eps) = (params.c, params.epsilon);
    let mut beta = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => vec![F::zero(); n],
    };
    // u = y − Kβ
    let mut u: Vec<F> = (0..n)
        .map(|i| (0..n).fold(y[i], |acc, j| acc - k[(i, j)] * beta[j]))
        .collect();

    let mut iterations = 0;
    let mut violation = F::zero();
    let mut converged = false;
    loop {
        let state = kkt(&u, &beta, c, eps);
        let (Some((i, vu)), Some((j, vd))) = (state.up, state.down) else {
            converged = true;
            break;
        };
        violation = vu - vd;
        if violation < params.tolerance {
            converged = true;
            break;
        }
        if iterations >= params.max_iterations || i == j {
            break;
        }
        let eta = k[(i, i)] + k[(j, j)] - k[(i, j)] * F::lit(2.0);
        let lo = nalgebra::RealField::max(-c - beta[i], beta[j] - c);
        let hi = nalgebra::RealField::min(c - beta[i], beta[j] + c);
        // gradient of the smooth part along the pair direction is −u_i + u_j
        let t = line_minimize(eta, u[j] - u[i], eps, beta[i], beta[j], lo, hi);
        iterations += 1;
        if t == F::zero() {
            break;
        }
        beta[i] += t;
        beta[j] -= t;
        for r in 0..n {
            u[r] -= t * (k[(r, i)] - k[(r, j)]);
        }
    }

    let bias = bias_from(&u, &beta, c, eps);
    (beta, bias, converged, iterations, violation.max(F::zero()))
}

fn bias_from<F: Scalar>(u: &[F], beta: &[F], c: F, eps: F) -> F {
    let mut lower: Option<F> = None;
    let mut upper: Option<F> = None;
    for i in 0..u.len() {
        let (lo, hi) = residual_bounds(beta[i], c, eps);
        if let Some(hi) = hi {
            let v = u[i] - hi;
            lower = Some(lower.map_or(v, |l| nalgebra::RealField::max(l, v)));
        }
        if let Some(lo) = lo {
            let v = u[i] - lo;
            upper = Some(upper.map_or(v, |h| nalgebra::RealField::min(h, v)));
        }
    }
    match (lower, upper) {
        (Some(l), Some(h)) => (l + h) * F::lit(0.5),
        (Some(l), None) => l,
        (None, Some(h)) => h,
        (None, None) => F::zero(),
    }
}

pub(super) fn fit_agent<F: Scalar>(
    kernel: &SimilarityMatrix<F>,
    store: &ObservationStore<F>,
    config: &AgentConfig<F>,
    center: F,
    warm: Option<&SvrFit<F>>,
) -> SvrFit<F> {
    let ids = store.observed();
    let k = kernel.submatrix(&ids);
    let y: Vec<F> = ids.iter().map(|&a| store.mean(a).unwrap() - center).collect();
    let start = warm.map(|w| {
        ids.iter()
            .map(|a| w.ids.binary_search(a).map_or(F::zero(), |pos| w.beta[pos]))
            .collect::<Vec<F>>()
    });
    let params = SvrParams {
        c: config.svr_c,
        epsilon: config.svr_epsilon,
        tolerance: config.svr_tolerance,
        max_iterations: config.svr_max_passes * ids.len().max(1),
    };
    let (beta, bias, converged, iterations, max_violation) = solve_dual(&k, &y, params, start.as_deref());
    SvrFit { ids, beta, bias, converged, iterations, max_violation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(c: f64, eps: f64) -> SvrParams<f64> {
        SvrParams { c, epsilon: eps, tolerance: 1e-9, max_iterations: 100_000 }
    }

    /// Projected gradient on the (α, α*) form of the dual; projection onto the
    /// box intersected with Σα − Σα* = 0 by bisection on the multiplier.
    fn oracle_objective(k: &DMatrix<f64>, y: &[f64], c: f64, eps: f64) -> f64 {
        let n = y.len();
        let lmax = nalgebra::SymmetricEigen::new(k.clone()).eigenvalues.max().max(1e-12);
        let step = 1.0 / (2.0 * lmax);
        let mut z = vec![0.0; 2 * n];
        let project = |v: &[f64]| -> Vec<f64> {
            let sign = |i: usize| if i < n { 1.0 } else { -1.0 };
            let at = |lam: f64| -> (Vec<f64>, f64) {
                let p: Vec<f64> = (0..2 * n).map(|i| (v[i] - lam * sign(i)).clamp(0.0, c)).collect();
                let s = (0..2 * n).map(|i| sign(i) * p[i]).sum();
                (p, s)
            };
            let (mut lo, mut hi) = (-1e6, 1e6);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if at(mid).1 > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            at(0.5 * (lo + hi)).0
        };
        for _ in 0..200_000 {
            let beta: Vec<f64> = (0..n).map(|i| z[i] - z[n + i]).collect();
            let kb: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[(i, j)] * beta[j]).sum()).collect();
            let mut grad = vec![0.0; 2 * n];
            for i in 0..n {
                grad[i] = kb[i] - y[i] + eps;
                grad[n + i] = -kb[i] + y[i] + eps;
            }
            let stepped: Vec<f64> = (0..2 * n).map(|i| z[i] - step * grad[i]).collect();
            z = project(&stepped);
        }
        let beta: Vec<f64> = (0..n).map(|i| z[i] - z[n + i]).collect();
        let l1: f64 = z.iter().sum();
        let quad = dual_objective(k, y, &beta, 0.0);
        quad + eps * l1
    }

    fn random_kernel(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        DMatrix::from_fn(n, n, |i, j| 1.0 - (s[i] - s[j]).abs() / 6.0)
    }

    #[test]
    fn single_point_is_fit_exactly() {
        let k = DMatrix::from_element(1, 1, 1.0);
        let (beta, bias, converged, _, _) = solve_dual(&k, &[2.5], params(100.0, 0.1), None);
        assert!(converged);
        assert_eq!(beta, vec![0.0]);
        assert!((bias - 2.5).abs() <= 0.1);
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let k = random_kernel(&mut rng, 5);
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (beta, _, converged, _, _) = solve_dual(&k, &y, params(1.0, 0.1), None);
            assert!(converged);
            let ours = dual_objective(&k, &y, &beta, 0.1);
            let oracle = oracle_objective(&k, &y, 1.0, 0.1);
            assert!((ours - oracle).abs() < 1e-4, "ours {ours} oracle {oracle}");
        }
    }

    #[test]
    fn dual_feasibility_always_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..30 {
            let k = random_kernel(&mut rng, n);
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let c = rng.random_range(0.1..3.0);
            let p = SvrParams { c, epsilon: 0.1, tolerance: 1e-3, max_iterations: 50 * n };
            let (beta, _, _, _, _) = solve_dual(&k, &y, p, None);
            let sum: f64 = beta.iter().sum();
            assert!(sum.abs() < 1e-9, "{sum}");
            assert!(beta.iter().all(|b| b.abs() <= c + 1e-12));
        }
    }

    #[test]
    fn iteration_budget_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random_kernel(&mut rng, 20);
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
        let p = SvrParams { c: 10.0, epsilon: 0.0, tolerance: 1e-12, max_iterations: 1 };
        let (_, _, converged, iterations, violation) = solve_dual(&k, &y, p, None);
        assert!(!converged);
        assert_eq!(iterations, 1);
        assert!(violation > 0.0);
    }
}
