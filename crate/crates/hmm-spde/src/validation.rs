//! Property checks that are not rate fits: invariant-law moments, pathwise
//! contraction, the `F̄` oracle, the collapse identity and cost accounting.

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use hmm_core::averaging::{averaged_trajectory, fbar_sampled, GaussianCoefficient, InvariantMeasureSpec, SampledFbarConfig, SlowOnlyCoefficient};
use hmm_core::coefficients::{bump, preset_p2, CoefficientSpec};
use hmm_core::hmm::{choose_params, cost_compare, run_hmm, EstimatorNoise, HmmParams, ParamRequest, Regime, StrongBranch};
use hmm_core::microsolver::{contraction_factor, stationary_variance_linear, MicroChain};
use hmm_core::noise::{NoiseStreamKey, Stream};
use hmm_core::quadrature::DEFAULT_ORDER;
use hmm_core::spectral::SpectralField;
use hmm_core::SlowFastSystem;

use crate::experiments::gaussian_draw;
use crate::problem::Problem;
use crate::stats::mix_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantVarianceConfig {
    pub modes: usize,
    pub tau: f64,
    pub steps: u64,
    pub tracked: Vec<usize>,
    pub batches: u64,
    pub seed: u64,
}

impl Default for InvariantVarianceConfig {
    fn default() -> Self {
        Self { modes: 63, tau: 0.01, steps: 1_000_000, tracked: vec![1, 2, 5, 20], batches: 1000, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeVariance {
    pub mode: usize,
    pub empirical: f64,
    pub expected: f64,
    /// Batch-means standard error of `empirical`.
    pub stderr: f64,
    pub z: f64,
}

/// Time average of `y_k²` along one stationary `G ≡ 0` chain against
/// `1 / (2μ_k + τμ_k²)`. The chain starts from an exact stationary draw.
pub fn invariant_variance(cfg: &InvariantVarianceConfig) -> Result<Vec<ModeVariance>> {
    let sys = Problem::P1.system(cfg.modes)?;
    let expected = cfg
        .tracked
        .iter()
        .map(|&k| stationary_variance_linear(k, cfg.tau, &sys.op_b))
        .collect::<hmm_core::Result<Vec<_>>>()?;
    let all = Problem::P1.scheme_measure(&sys.op_b, cfg.tau).context("Gaussian fast law")?.variances;
    let mut y = gaussian_draw(&all, &NoiseStreamKey::sequential(cfg.seed, Stream::Initial, 1, 0)).into_coeffs();
    let mut chain = MicroChain::new(&sys, &SpectralField::zeros(cfg.modes), cfg.tau)?;
    let per_batch = cfg.steps / cfg.batches;
    let nt = cfg.tracked.len();
    let mut batch_means = vec![vec![0.0; cfg.batches as usize]; nt];
    let mut m = 0;
    for b in 0..cfg.batches as usize {
        let mut acc = vec![0.0; nt];
        for _ in 0..per_batch {
            chain.step(&mut y, &NoiseStreamKey::sequential(cfg.seed, Stream::Micro, 1, m));
            m += 1;
            for (a, &k) in acc.iter_mut().zip(&cfg.tracked) {
                *a += y[k - 1] * y[k - 1];
            }
        }
        for (t, a) in acc.iter().enumerate() {
            batch_means[t][b] = a / per_batch as f64;
        }
    }
    Ok(cfg
        .tracked
        .iter()
        .zip(&expected)
        .zip(&batch_means)
        .map(|((&mode, &expected), means)| {
            let s = crate::stats::summarize(means);
            ModeVariance { mode, empirical: s.mean, expected, stderr: s.stderr, z: (s.mean - expected) / s.stderr }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionConfig {
    pub modes: usize,
    pub alpha: f64,
    pub taus: Vec<f64>,
    pub steps: u64,
    pub pairs: u64,
    /// Initial data are `scale Σ_k z_k / k e_k`.
    pub scale: f64,
    /// Slack for rounding once the two paths have merged, in units of
    /// `f64::EPSILON (|y| + |y'|)` on `|r_m|`.
    pub rounding_slack: f64,
    pub seed: u64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self { modes: 63, alpha: 2.0, taus: vec![0.01, 0.1], steps: 10_000, pairs: 16, scale: 4.0, rounding_slack: 4.0, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionOutcome {
    pub tau: f64,
    pub pair: u64,
    pub rho: f64,
    pub violations: u64,
    /// Largest `|r_m|² / (ρ^m |r_0|²)` while the bound is above the
    /// rounding floor.
    pub max_ratio: f64,
    /// First step at which the bound fell below the rounding floor.
    pub floor_step: Option<u64>,
}

/// Two P2 chains from different initial data on common noise; checks
/// `|r_m|² ≤ ρ^m |r_0|²` at every step.
pub fn pathwise_contraction(cfg: &ContractionConfig) -> Result<Vec<ContractionOutcome>> {
    let sys = SlowFastSystem::laplacian(preset_p2(cfg.alpha), cfg.modes)?;
    let x = SpectralField::basis(cfg.modes, 1);
    let shape: Vec<f64> = (1..=cfg.modes).map(|k| (cfg.scale / k as f64).powi(2)).collect();
    let jobs: Vec<(f64, u64)> = cfg.taus.iter().flat_map(|&t| (0..cfg.pairs).map(move |p| (t, p))).collect();
    jobs.into_par_iter()
        .map(|(tau, pair)| {
            let rho = contraction_factor(tau, sys.coefficients.lipschitz_g_y, sys.op_b.smallest())?;
            let mut chain = MicroChain::new(&sys, &x, tau)?;
            let mut a = gaussian_draw(&shape, &NoiseStreamKey::sequential(cfg.seed, Stream::Initial, 2 * pair as u32 + 1, 0)).into_coeffs();
            let mut b = gaussian_draw(&shape, &NoiseStreamKey::sequential(cfg.seed, Stream::Initial, 2 * pair as u32 + 2, 0)).into_coeffs();
            let r0: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum();
            let mut bound = r0;
            let mut violations = 0;
            let mut max_ratio: f64 = 0.0;
            let mut floor_step = None;
            for m in 0..cfg.steps {
                let key = NoiseStreamKey::sequential(cfg.seed, Stream::Micro, pair as u32 + 1, m);
                chain.step(&mut a, &key);
                chain.step(&mut b, &key);
                bound *= rho;
                let r: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum();
                let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                let floor = (cfg.rounding_slack * f64::EPSILON * (na + nb)).powi(2);
                if bound > floor {
                    max_ratio = max_ratio.max(r / bound);
                } else if floor_step.is_none() {
                    floor_step = Some(m + 1);
                }
                if r > bound + floor {
                    violations += 1;
                }
            }
            Ok(ContractionOutcome { tau, pair, rho, violations, max_ratio, floor_step })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbarCheckConfig {
    pub modes: usize,
    pub tau: f64,
    pub warmup: u64,
    pub window: u64,
    pub batches: u64,
    pub seed: u64,
}

impl Default for FbarCheckConfig {
    fn default() -> Self {
        Self { modes: 63, tau: 0.01, warmup: 2_000, window: 400_000, batches: 100, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FbarCheck {
    pub quadrature: f64,
    pub closed_form: f64,
    /// Sampled estimate from the `τ`-microsolver.
    pub sampled: f64,
    pub sampled_stderr: f64,
    /// Quadrature under the microsolver's own invariant law.
    pub scheme_quadrature: f64,
    pub z: f64,
    /// `|sampled - quadrature|`: the `τ`-bias of the sampler.
    pub nu_gap: f64,
}

/// `f = cos(y)`, `G ≡ 0`, at `x = 0` and `ξ = 1/2`.
pub fn fbar_oracle(cfg: &FbarCheckConfig) -> Result<FbarCheck> {
    anyhow::ensure!(cfg.modes % 2 == 1, "ξ = 1/2 is a node only for odd K");
    let sys = SlowFastSystem::laplacian(CoefficientSpec::new(|_, _, y: f64| y.cos(), 1.0), cfg.modes)?;
    let mid = cfg.modes / 2;
    let x = SpectralField::zeros(cfg.modes);
    let nu = InvariantMeasureSpec::nu(&sys.op_b);
    let quadrature = GaussianCoefficient::new(&sys, &nu, DEFAULT_ORDER)?.grid_values(&x)?.values()[mid];
    let closed_form = (-nu.pointwise_variance(0.5)? / 2.0).exp();
    let scheme = InvariantMeasureSpec::scheme_stationary(&sys.op_b, cfg.tau, 0.0)?;
    let scheme_quadrature = GaussianCoefficient::new(&sys, &scheme, DEFAULT_ORDER)?.grid_values(&x)?.values()[mid];
    let sampled = fbar_sampled(
        &sys,
        &x,
        &SampledFbarConfig { tau: cfg.tau, warmup: cfg.warmup, window: cfg.window, batches: cfg.batches, seed: cfg.seed },
    )?;
    let value = sampled.grid_values.values()[mid];
    let stderr = sampled.grid_stderr[mid];
    Ok(FbarCheck {
        quadrature,
        closed_form,
        sampled: value,
        sampled_stderr: stderr,
        scheme_quadrature,
        z: (value - scheme_quadrature) / stderr,
        nu_gap: (value - quadrature).abs(),
    })
}

/// `F(x, y) = sin(πξ) / (1 + x²)`: HMM and averaged scheme coincide.
pub fn collapse_deviation(modes: usize, combos: &[(u64, u64, u64)], seed: u64) -> Result<f64> {
    let spec = CoefficientSpec::new(|xi, x, _| (std::f64::consts::PI * xi).sin() * bump(x), 1.0).y_independent();
    let sys = SlowFastSystem::laplacian(spec, modes)?;
    let exact = SlowOnlyCoefficient::new(&sys)?;
    let x0 = SpectralField::basis(modes, 1).scaled(2.0);
    let y0 = SpectralField::basis(modes, 2);
    let mut worst: f64 = 0.0;
    for (i, &(n, m, nt)) in combos.iter().enumerate() {
        let params = HmmParams::new(1e-3, 0.05, 1e-5, 0.5, n, m, nt)?;
        let run = run_hmm(&sys, &x0, &y0, &params, &EstimatorNoise::new(mix_seed(seed, i as u64, 0)))?;
        let avg = averaged_trajectory(&x0, &exact, &sys.op_a, params.macro_dt, params.macro_steps())?;
        anyhow::ensure!(run.trajectory.len() == avg.len(), "trajectory lengths differ");
        for (a, b) in run.trajectory.iter().zip(&avg) {
            worst = worst.max(a.distance(b));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostCheck {
    pub runs: usize,
    pub mismatches: usize,
    /// `(ratio at ε, ratio at ε/2)` per request.
    pub halving: Vec<(f64, f64)>,
}

impl CostCheck {
    pub fn max_halving_error(&self) -> f64 {
        self.halving.iter().map(|(a, b)| (b / a - 0.5).abs()).fold(0.0, f64::max)
    }
}

/// Counted microsteps against `n_0 M (n_T + N - 1)` over a grid of runs, and
/// the HMM/direct cost ratio under `ε → ε/2` at fixed `tol`.
pub fn cost_accounting(seed: u64) -> Result<CostCheck> {
    let mut runs = 0;
    let mut mismatches = 0;
    for (i, problem) in [Problem::P1, Problem::P2, Problem::P3].into_iter().enumerate() {
        let sys = problem.system(7)?;
        let x0 = SpectralField::basis(7, 1);
        let y0 = SpectralField::zeros(7);
        for (j, &(dt, t, n, m, nt)) in
            [(0.1, 1.0, 1, 1, 1), (0.05, 0.3, 3, 2, 4), (0.07, 0.5, 2, 3, 1), (0.3, 1.0, 5, 1, 7)].iter().enumerate()
        {
            let params = HmmParams::new(1e-3, dt, 1e-5, t, n, m, nt)?;
            let run = run_hmm(&sys, &x0, &y0, &params, &EstimatorNoise::new(mix_seed(seed, i as u64, j as u64)))?;
            let expected = params.macro_steps() * params.replicas * params.micro_steps_per_macro();
            runs += 1;
            if run.cost.total_micro_steps != expected || run.final_state.cost_counter != expected {
                mismatches += 1;
            }
        }
    }
    let mut halving = Vec::new();
    for (regime, branch) in [
        (Regime::Weak, StrongBranch::SingleReplica),
        (Regime::Strong, StrongBranch::SingleReplica),
        (Regime::Strong, StrongBranch::SingleWindow),
    ] {
        for tol in [0.2, 0.1] {
            let req = ParamRequest { strong_branch: branch, ..ParamRequest::new(tol, 1e-3, regime) };
            let half = ParamRequest { epsilon: 5e-4, ..req };
            let a = cost_compare(&choose_params(&req)?, &req)?;
            let b = cost_compare(&choose_params(&half)?, &half)?;
            halving.push((a, b));
        }
    }
    Ok(CostCheck { runs, mismatches, halving })
}
