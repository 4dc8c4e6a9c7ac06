//! The full theory oracle suite behind the `theory-check` command.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    /// Informational rows never fail the suite.
    pub informational: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoryReport {
    pub rows: Vec<CheckRow>,
    pub seconds: f64,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed || r.informational)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.rows.push(CheckRow { name: name.into(), passed, informational: false, detail });
    }

    fn info(&mut self, name: &str, passed: bool, detail: String) {
        self.rows.push(CheckRow { name: name.into(), passed, informational: true, detail });
    }
}

fn random_two_train(rng: &mut ChaCha8Rng) -> TwoTrainSpec<f64> {
    let sigma0_sq: f64 = rng.random_range(0.5..2.0);
    let sigma1_sq = rng.random_range(0.5..2.0);
    let c_p = rng.random_range(-0.8..0.8) * (sigma0_sq * sigma1_sq).sqrt();
    TwoTrainSpec {
        c0_g: rng.random_range(-1.0..1.0),
        c1_g: rng.random_range(-1.0..1.0),
        c_p,
        sigma0_sq,
        sigma1_sq,
        y0: rng.random_range(-3.0..3.0),
        y1: rng.random_range(-3.0..3.0),
    }
}

fn two_train_vs_general(report: &mut TheoryReport, rng: &mut ChaCha8Rng, count: usize) {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..count {
        let spec = random_two_train(rng);
        let general = gp_mean_general(&spec.train_covariance(), &spec.cross_covariance(), &spec.targets());
        match (two_train_prediction(&spec), general) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b[0]).abs()),
            _ => failures += 1,
        }
    }
    report.push(
        "two-train prediction equals general solve (1e-12)",
        failures == 0 && worst <= 1e-12,
        format!("{count} specs, max |diff| = {worst:.3e}, solve failures = {failures}"),
    );
}

fn inverse_identity(report: &mut TheoryReport) {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 2..=20usize {
        let lower = -1.0 / (n - 1) as f64;
        for step in 1..10 {
            // interior points of the valid range (lower, 1)
            let c = lower + (1.0 - lower) * step as f64 / 10.0;
            let Ok(inv) = equicorrelated_inverse::<f64>(n, c) else { continue };
            let product = equicorrelated_matrix(n, c) * inv;
            worst = worst.max((product - DMatrix::identity(n, n)).amax());
            cases += 1;
        }
    }
    report.push(
        "equicorrelated inverse satisfies K·K⁻¹ = I (1e-10)",
        cases == 19 * 9 && worst <= 1e-10,
        format!("{cases} (n, c_p) cases, max |K·K⁻¹ − I| = {worst:.3e}"),
    );
}

fn equicorrelated_paths(report: &mut TheoryReport, rng: &mut ChaCha8Rng) {
    let mut worst = 0.0f64;
    let mut worst_alt = 0.0f64;
    for n in 2..=20usize {
        let lower = -1.0 / (n - 1) as f64;
        let c_p = lower + (1.0 - lower) * rng.random_range(0.05..0.95);
        let spec = EquicorrelatedSpec {
            n_train: n,
            m_test: 3,
            c_p,
            c_g: rng.random_range(-1.0..1.0),
            y_p: (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        };
        let general = equicorrelated_prediction(&spec).expect("valid spec");
        let closed = equicorrelated_closed_form(&spec).expect("valid spec");
        let sum: f64 = spec.y_p.iter().sum();
        let alt = n as f64 * spec.c_g * (1.0 + (n as f64 - 2.0) * c_p) / ((1.0 - c_p) * (1.0 + (n as f64 - 1.0) * c_p)) * sum;
        for g in general.iter() {
            worst = worst.max((g - closed).abs());
            worst_alt = worst_alt.max((g - alt).abs() / g.abs().max(1e-12));
        }
    }
    report.push(
        "equicorrelated prediction = c_g·Σy / (1 + (n−1)c_p) (1e-10)",
        worst <= 1e-10,
        format!("n = 2..20, max |general − closed form| = {worst:.3e}"),
    );
    report.info(
        "coefficient n·c_g(1+(n−2)c_p)/((1−c_p)(1+(n−1)c_p)) matches general solve",
        worst_alt <= 1e-8,
        format!("max relative difference = {worst_alt:.3e}"),
    );
}

fn epsilon_shapes(report: &mut TheoryReport, specs: &[TwoTrainSpec<f64>], grid: &[f64]) {
    let mut linear_dev = 0.0f64;
    let mut sublinear_breaks = 0;
    for spec in specs {
        let ratios: Vec<f64> = grid[1..].iter().map(|&e| error_kstar(e, spec).unwrap() / e).collect();
        for r in &ratios {
            linear_dev = linear_dev.max((r - ratios[0]).abs() / ratios[0].abs().max(1e-300));
        }
        let k_ratios: Vec<f64> = grid[1..].iter().map(|&e| error_k(e, spec).unwrap() / e).collect();
        sublinear_breaks += k_ratios.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12)).count();
    }
    report.push(
        "train/test error is linear in ε",
        linear_dev <= 1e-12,
        format!("{} specs, max relative spread of error/ε = {linear_dev:.3e}", specs.len()),
    );
    report.push(
        "train/train error grows sublinearly in ε",
        sublinear_breaks == 0,
        format!("{} specs, increases of error/ε = {sublinear_breaks}", specs.len()),
    );
}

/// Runs every closed-form check. `chebyshev_trials` draws per (ρ₀, c) grid point.
pub fn run_theory_checks(seed: u64, chebyshev_trials: usize) -> TheoryReport {
    let start = Instant::now();
    let mut report = TheoryReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    two_train_vs_general(&mut report, &mut rng, 10_000);

    let anchor = two_train_prediction(&TwoTrainSpec::symmetric(0.5, 0.25, 1.0, 1.0, 2.0)).unwrap_or(f64::NAN);
    report.push(
        "symmetric two-train prediction c_g(y₀+y₁)/(σ²+c_p)",
        (anchor - 1.2).abs() <= 1e-12,
        format!("c_g=0.5, c_p=0.25, σ²=1, y=(1,2) → {anchor}"),
    );

    inverse_identity(&mut report);
    equicorrelated_paths(&mut report, &mut rng);

    let grid = default_epsilon_grid::<f64>();
    let specs = random_symmetric_specs::<f64, _>(100, &mut rng);
    epsilon_shapes(&mut report, &specs, &grid);

    let scan = monotonicity_scan(&specs, &grid);
    report.push(
        "errors non-decreasing in ε and train/test error ≥ train/train error",
        scan.passed(),
        if scan.passed() {
            format!("{} specs × {} ε values, no violations", scan.specs, grid.len())
        } else {
            format!("{} violations, first: {}", scan.violations.len(), scan.violations[0])
        },
    );

    let mut cheb_ok = true;
    let mut detail = Vec::new();
    for rho in [0.0, 0.25, 0.5, 0.75, 0.9] {
        for c in [1.5, 2.0, 3.0] {
            match chebyshev_check(rho, 1.0, c, chebyshev_trials, &mut rng) {
                Ok(o) => {
                    cheb_ok &= o.within_bound();
                    detail.push(format!("ρ₀={rho},c={c}: {:.4}≤{:.4}", o.empirical, o.bound));
                }
                Err(e) => {
                    cheb_ok = false;
                    detail.push(e.to_string());
                }
            }
        }
    }
    report.push("Chebyshev bound holds on the (ρ₀, c) grid", cheb_ok, detail.join(" "));

    report.seconds = start.elapsed().as_secs_f64();
    report
}
