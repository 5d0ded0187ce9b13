//! Rate experiments behind `hmm-spde rates`.
//!
//! Each experiment isolates one term of the error decomposition: the other
//! terms are frozen or removed with an exact oracle so that the measured
//! rate belongs to the swept parameter only.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use hmm_core::averaging::{averaged_trajectory, reference_solution, ZeroCoefficient};
use hmm_core::direct::{run_direct, DirectConfig};
use hmm_core::hmm::{estimate_ftilde, run_hmm, EstimatorNoise, HmmParams};
use hmm_core::microsolver::stationary_variance_linear;
use hmm_core::noise::{fill_standard_normals, NoiseStreamKey, Stream};
use hmm_core::spectral::SpectralField;

use crate::functional::TestFunctional;
use crate::problem::Problem;
use crate::report::{FitScale, RateReport};
use crate::stats::{mix_seed, summarize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    StrongM,
    StrongNt,
    WeakTau,
    InvariantTau,
    Averaging,
    MacroOrder,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::StrongM,
        Experiment::StrongNt,
        Experiment::WeakTau,
        Experiment::InvariantTau,
        Experiment::Averaging,
        Experiment::MacroOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::StrongM => "strong_m",
            Experiment::StrongNt => "strong_nt",
            Experiment::WeakTau => "weak_tau",
            Experiment::InvariantTau => "invariant_tau",
            Experiment::Averaging => "averaging",
            Experiment::MacroOrder => "macro_order",
        }
    }

    /// Run with default settings; `seeds` overrides the Monte-Carlo budget.
    pub fn run(self, seeds: Option<usize>, seed: u64) -> Result<RateReport> {
        match self {
            Experiment::StrongM => {
                let d = StrongMConfig::default();
                strong_m(&StrongMConfig { seeds: seeds.unwrap_or(d.seeds), seed, ..d })
            }
            Experiment::StrongNt => {
                let d = WarmupConfig::default();
                warmup_bias(&WarmupConfig { samples: seeds.unwrap_or(d.samples), seed, ..d })
            }
            Experiment::WeakTau => {
                let d = WeakTauConfig::default();
                weak_tau(&WeakTauConfig { seeds: seeds.unwrap_or(d.seeds), seed, ..d })
            }
            Experiment::InvariantTau => invariant_tau(&InvariantTauConfig::default()),
            Experiment::Averaging => {
                let d = AveragingConfig::default();
                averaging(&AveragingConfig { seeds: seeds.unwrap_or(d.seeds), seed, ..d })
            }
            Experiment::MacroOrder => macro_order(&MacroOrderConfig::default()),
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Draw `y` from the centered Gaussian with per-mode `variances`.
pub fn gaussian_draw(variances: &[f64], key: &NoiseStreamKey) -> SpectralField {
    let mut z = vec![0.0; variances.len()];
    fill_standard_normals(key, &mut z);
    z.iter_mut().zip(variances).for_each(|(zi, v)| *zi *= v.sqrt());
    SpectralField::from_coeffs(z)
}

/// Fluctuation term: `E|X_{n_0} - X̄_{n_0}|` against the replica count `M`.
///
/// `X̄` uses the exact mean of the `τ`-microsolver window average and the
/// warm-up is long enough for its bias to vanish, so only the estimator's
/// variance remains.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongMConfig {
    pub modes: usize,
    pub tau: f64,
    pub warmup: u64,
    pub window: u64,
    pub macro_dt: f64,
    pub t_final: f64,
    pub replicas: Vec<u64>,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for StrongMConfig {
    fn default() -> Self {
        Self {
            modes: 63,
            tau: 0.05,
            warmup: 40,
            window: 1,
            macro_dt: 0.01,
            t_final: 0.5,
            replicas: vec![1, 4, 16, 64],
            seeds: 64,
            seed: 1,
        }
    }
}

pub fn strong_m(cfg: &StrongMConfig) -> Result<RateReport> {
    let start = Instant::now();
    let problem = Problem::P1;
    let sys = problem.system(cfg.modes)?;
    let oracle = problem.scheme_oracle(&sys, cfg.tau).context("P1 has a Gaussian fast law")?;
    let base = HmmParams::new(1.0, cfg.macro_dt, cfg.tau, cfg.t_final, cfg.window, 1, cfg.warmup)?;
    let n0 = base.macro_steps();
    let x0 = SpectralField::basis(cfg.modes, 1);
    let y0 = SpectralField::zeros(cfg.modes);
    let xbar = averaged_trajectory(&x0, &oracle, &sys.op_a, cfg.macro_dt, n0)?
        .pop()
        .expect("trajectory holds X̄_0");
    let mut report = RateReport::new("strong_m", "M", FitScale::LogLog);
    for (i, &m) in cfg.replicas.iter().enumerate() {
        let params = HmmParams::new(1.0, cfg.macro_dt, cfg.tau, cfg.t_final, cfg.window, m, cfg.warmup)?;
        let errors = (0..cfg.seeds)
            .into_par_iter()
            .map(|s| {
                let noise = EstimatorNoise::new(mix_seed(cfg.seed, i as u64, s as u64));
                Ok(run_hmm(&sys, &x0, &y0, &params, &noise)?.final_x().distance(&xbar))
            })
            .collect::<Result<Vec<f64>>>()?;
        let s = summarize(&errors);
        report.push("strong", m as f64, s.mean, s.stderr, s.n as u64);
    }
    report.refit();
    report.extra.insert("expected_slope".into(), -0.5);
    report.extra.insert("tau".into(), cfg.tau);
    report.extra.insert("macro_steps".into(), n0 as f64);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Warm-up bias of `F̃` against `n_T`.
///
/// Each sample runs the estimator twice on common noise: once from the
/// displaced start `y_0 = d e_1` and once from an exact draw of the
/// microsolver's stationary law. The second run is unbiased for the oracle
/// `F̄_τ`, so the mean difference is the bias and its noise shrinks with the
/// coupling. `|E D|²` is estimated without the `tr Cov / S` noise floor.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmupConfig {
    pub modes: usize,
    pub tau: f64,
    pub warmups: Vec<u64>,
    pub displacement: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for WarmupConfig {
    fn default() -> Self {
        Self { modes: 63, tau: 0.01, warmups: vec![5, 10, 15, 20, 25], displacement: 1.0, samples: 20_000, seed: 1 }
    }
}

/// Per-chunk sums of `D` and `D Dᵀ` for every warm-up.
struct BiasMoments {
    sum: Vec<Vec<f64>>,
    outer: Vec<Vec<f64>>,
}

impl BiasMoments {
    fn new(points: usize, k: usize) -> Self {
        Self { sum: vec![vec![0.0; k]; points], outer: vec![vec![0.0; k * k]; points] }
    }

    fn add(&mut self, p: usize, d: &[f64]) {
        let k = d.len();
        for (s, v) in self.sum[p].iter_mut().zip(d) {
            *s += v;
        }
        let o = &mut self.outer[p];
        for i in 0..k {
            for j in 0..k {
                o[i * k + j] += d[i] * d[j];
            }
        }
    }

    fn merge(mut self, other: BiasMoments) -> Self {
        for (a, b) in self.sum.iter_mut().flatten().zip(other.sum.iter().flatten()) {
            *a += b;
        }
        for (a, b) in self.outer.iter_mut().flatten().zip(other.outer.iter().flatten()) {
            *a += b;
        }
        self
    }
}

pub fn warmup_bias(cfg: &WarmupConfig) -> Result<RateReport> {
    let start = Instant::now();
    let problem = Problem::P1;
    let k = cfg.modes;
    let sys = problem.system(k)?;
    let variances = problem.scheme_measure(&sys.op_b, cfg.tau).context("P1 has a Gaussian fast law")?.variances;
    let x = SpectralField::basis(k, 1);
    let displaced = SpectralField::basis(k, 1).scaled(cfg.displacement);
    let params = cfg
        .warmups
        .iter()
        .map(|&nt| HmmParams::new(1.0, 1.0, cfg.tau, 1.0, 1, 1, nt))
        .collect::<hmm_core::Result<Vec<_>>>()?;
    let noise = EstimatorNoise::new(cfg.seed);
    let points = cfg.warmups.len();
    const CHUNK: usize = 250;
    let chunks = cfg.samples.div_ceil(CHUNK);
    let moments = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<BiasMoments> {
            let mut acc = BiasMoments::new(points, k);
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(cfg.samples) {
                let stationary = gaussian_draw(&variances, &NoiseStreamKey::sequential(cfg.seed, Stream::Initial, 1, i as u64));
                for (p, par) in params.iter().enumerate() {
                    let mut yd = [displaced.clone()];
                    let mut ys = [stationary.clone()];
                    let fd = estimate_ftilde(&sys, &x, &mut yd, par, &noise, i as u64)?;
                    let fs = estimate_ftilde(&sys, &x, &mut ys, par, &noise, i as u64)?;
                    acc.add(p, (&fd - &fs).coeffs());
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .reduce(BiasMoments::merge)
        .ok_or_else(|| anyhow!("no samples"))?;
    let s = cfg.samples as f64;
    let mut report = RateReport::new("strong_nt", "n_T", FitScale::SemiLog);
    for (p, &nt) in cfg.warmups.iter().enumerate() {
        let mean: Vec<f64> = moments.sum[p].iter().map(|v| v / s).collect();
        let cov = |i: usize, j: usize| (moments.outer[p][i * k + j] - s * mean[i] * mean[j]) / (s - 1.0);
        let trace: f64 = (0..k).map(|i| cov(i, i)).sum();
        let norm2: f64 = mean.iter().map(|v| v * v).sum();
        let bias = (norm2 - trace / s).max(0.0).sqrt();
        let norm = norm2.sqrt();
        let proj_var: f64 = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| mean[i] * mean[j] * cov(i, j))
            .sum::<f64>()
            / norm2.max(f64::MIN_POSITIVE);
        report.push("bias", nt as f64, bias, (proj_var / s).sqrt(), cfg.samples as u64);
        report.extra.insert(format!("raw_norm_n_t_{nt}"), norm);
    }
    report.refit();
    let mu1 = sys.op_b.eigenvalues()[0];
    let reference_rate = 2.0 * (1.0 + cfg.tau * mu1).ln();
    report.extra.insert("reference_rate".into(), reference_rate);
    if let Some(slope) = report.slope("bias") {
        report.extra.insert("fitted_rate".into(), -slope);
        report.extra.insert("rate_relative_deviation".into(), (-slope - reference_rate).abs() / reference_rate);
    }
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Weak error against `τ` for the linear fast drift (P3), with `n_T τ` and
/// `N τ` held fixed.
///
/// Series `oracle` is the deterministic part `|Φ(X̄^τ_n) - Φ(X̄_n)|`, where
/// `X̄^τ` averages against the microsolver's invariant law; series `hmm` is
/// the Monte-Carlo weak error of the full scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakTauConfig {
    pub modes: usize,
    pub taus: Vec<f64>,
    pub warmup_time: f64,
    pub window_time: f64,
    pub macro_dt: f64,
    pub t_final: f64,
    /// Direction `h` of `Φ(x) = cos(⟨x, h⟩)` is `h_scale e_1`.
    pub h_scale: f64,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for WeakTauConfig {
    fn default() -> Self {
        Self {
            modes: 63,
            taus: vec![0.04, 0.02, 0.01, 0.005],
            warmup_time: 2.0,
            window_time: 2.0,
            macro_dt: 0.05,
            t_final: 0.5,
            h_scale: 4.0,
            seeds: 64,
            seed: 1,
        }
    }
}

pub fn weak_tau(cfg: &WeakTauConfig) -> Result<RateReport> {
    let start = Instant::now();
    let problem = Problem::P3;
    let sys = problem.system(cfg.modes)?;
    let oracle = problem.oracle(&sys).context("P3 has a Gaussian fast law")?;
    let x0 = SpectralField::basis(cfg.modes, 1);
    let y0 = SpectralField::zeros(cfg.modes);
    let phi = TestFunctional::CosInner(SpectralField::basis(cfg.modes, 1).scaled(cfg.h_scale));
    let n0 = HmmParams::new(1.0, cfg.macro_dt, cfg.taus[0], cfg.t_final, 1, 1, 1)?.macro_steps();
    let xbar = averaged_trajectory(&x0, &oracle, &sys.op_a, cfg.macro_dt, n0)?.pop().expect("non-empty");
    let target = phi.eval(&xbar);
    let mut report = RateReport::new("weak_tau", "tau", FitScale::LogLog);
    for (i, &tau) in cfg.taus.iter().enumerate() {
        let shifted = problem.scheme_oracle(&sys, tau).context("P3 has a Gaussian fast law")?;
        let xbar_tau = averaged_trajectory(&x0, &shifted, &sys.op_a, cfg.macro_dt, n0)?.pop().expect("non-empty");
        report.push("oracle", tau, (phi.eval(&xbar_tau) - target).abs(), 0.0, 0);
        let warmup = (cfg.warmup_time / tau).round().max(1.0) as u64;
        let window = (cfg.window_time / tau).round().max(1.0) as u64;
        let params = HmmParams::new(1.0, cfg.macro_dt, tau, cfg.t_final, window, 1, warmup)?;
        let values = (0..cfg.seeds)
            .into_par_iter()
            .map(|s| {
                let noise = EstimatorNoise::new(mix_seed(cfg.seed, i as u64, s as u64));
                Ok(phi.eval(run_hmm(&sys, &x0, &y0, &params, &noise)?.final_x()))
            })
            .collect::<Result<Vec<f64>>>()?;
        let s = summarize(&values);
        report.push("hmm", tau, (s.mean - target).abs(), s.stderr, s.n as u64);
    }
    report.refit();
    report.extra.insert("expected_slope".into(), 0.5);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Exact trace distance `Σ_k (1/(2μ_k) - v_k(τ))` between the continuous and
/// discrete invariant covariances for `G ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantTauConfig {
    pub modes: usize,
    pub taus: Vec<f64>,
}

impl Default for InvariantTauConfig {
    fn default() -> Self {
        Self { modes: 4095, taus: vec![1e-2, 1e-3, 1e-4, 1e-5] }
    }
}

pub fn invariant_trace_error(modes: usize, tau: f64) -> Result<f64> {
    let op = hmm_core::spectral::OperatorSpec::laplacian(modes)?;
    let mut total = 0.0;
    for (k, mu) in op.eigenvalues().iter().enumerate() {
        total += 0.5 / mu - stationary_variance_linear(k + 1, tau, &op)?;
    }
    Ok(total)
}

pub fn invariant_tau(cfg: &InvariantTauConfig) -> Result<RateReport> {
    let start = Instant::now();
    let mut report = RateReport::new("invariant_tau", "tau", FitScale::LogLog);
    for &tau in &cfg.taus {
        report.push("trace", tau, invariant_trace_error(cfg.modes, tau)?, 0.0, 0);
    }
    report.refit();
    report.extra.insert("expected_slope".into(), 0.5);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Averaging principle: the direct solver's `X^ε(T)` against the averaged
/// flow `X̄(T)` as `ε → 0` with `dt/ε` fixed.
///
/// The fast chain of the direct solver relaxes to the invariant law of the
/// `dt/ε`-scheme, so the reference averages against that law; this removes
/// a `τ`-bias that would otherwise plateau the error.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingConfig {
    pub modes: usize,
    pub epsilons: Vec<f64>,
    pub dt_over_eps: f64,
    pub t_final: f64,
    pub fine_dt: f64,
    pub h_scale: f64,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for AveragingConfig {
    fn default() -> Self {
        Self {
            modes: 15,
            epsilons: vec![1e-1, 3e-2, 1e-2],
            dt_over_eps: 0.01,
            t_final: 0.5,
            fine_dt: 1e-4,
            h_scale: 4.0,
            seeds: 32,
            seed: 1,
        }
    }
}

pub fn averaging(cfg: &AveragingConfig) -> Result<RateReport> {
    let start = Instant::now();
    let problem = Problem::P1;
    let sys = problem.system(cfg.modes)?;
    let x0 = SpectralField::basis(cfg.modes, 1);
    let y0 = SpectralField::zeros(cfg.modes);
    let phi = TestFunctional::CosInner(SpectralField::basis(cfg.modes, 1).scaled(cfg.h_scale));
    let mut report = RateReport::new("averaging", "epsilon", FitScale::LogLog);
    for (i, &eps) in cfg.epsilons.iter().enumerate() {
        let steps = (cfg.t_final / (eps * cfg.dt_over_eps) * (1.0 - 1e-12)).ceil();
        let dt = cfg.t_final / steps;
        let oracle = problem.scheme_oracle(&sys, dt / eps).context("P1 has a Gaussian fast law")?;
        let reference = reference_solution(&x0, &oracle, &sys.op_a, cfg.t_final, cfg.fine_dt)?;
        let xbar = reference.extrapolated();
        let direct = DirectConfig { record_every: 0, ..DirectConfig::new(eps, dt, cfg.t_final, mix_seed(cfg.seed, i as u64, 0)) };
        let finals = (0..cfg.seeds)
            .into_par_iter()
            .map(|s| {
                let run = run_direct(&sys, &x0, &y0, &DirectConfig { replica: s as u32 + 1, ..direct })?;
                Ok(run.final_state.x)
            })
            .collect::<Result<Vec<SpectralField>>>()?;
        let strong: Vec<f64> = finals.iter().map(|x| x.distance(&xbar)).collect();
        let s = summarize(&strong);
        report.push("strong", eps, s.mean, s.stderr, s.n as u64);
        let weak: Vec<f64> = finals.iter().map(|x| phi.eval(x)).collect();
        let w = summarize(&weak);
        report.push("weak", eps, (w.mean - phi.eval(&xbar)).abs(), w.stderr, w.n as u64);
        report.extra.insert(format!("reference_richardson_delta_eps_{eps}"), reference.richardson_delta);
    }
    report.refit();
    report.extra.insert("expected_strong_slope".into(), 0.5);
    report.extra.insert("expected_weak_slope".into(), 1.0);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Deterministic order of the averaged macrosolver with the quadrature
/// oracle `F̄`, against a Richardson-extrapolated fine reference. Series
/// `zero` repeats the sweep with `F̄ ≡ 0` against the exact semigroup.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroOrderConfig {
    pub modes: usize,
    pub t_final: f64,
    pub divisions: Vec<u64>,
    /// Reference step is the finest macro step over `fine_factor`.
    pub fine_factor: u64,
}

impl Default for MacroOrderConfig {
    fn default() -> Self {
        Self { modes: 63, t_final: 1.0, divisions: vec![8, 16, 32, 64, 128], fine_factor: 64 }
    }
}

/// `|(1 + λ_k Δt)^{-n} x_k - e^{-λ_k T} x_k|` summed in quadrature over modes.
pub fn resolvent_semigroup_gap(x0: &SpectralField, eigenvalues: &[f64], dt: f64, steps: u64) -> f64 {
    let t = dt * steps as f64;
    x0.coeffs()
        .iter()
        .zip(eigenvalues)
        .map(|(x, l)| (x * ((1.0 + l * dt).powf(-(steps as f64)) - (-l * t).exp())).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn macro_order(cfg: &MacroOrderConfig) -> Result<RateReport> {
    let start = Instant::now();
    let problem = Problem::P1;
    let sys = problem.system(cfg.modes)?;
    let oracle = problem.oracle(&sys).context("P1 has a Gaussian fast law")?;
    let zero = ZeroCoefficient { modes: cfg.modes };
    let x0 = SpectralField::basis(cfg.modes, 1);
    let finest = *cfg.divisions.iter().max().ok_or_else(|| anyhow!("empty sweep"))?;
    let fine_dt = cfg.t_final / (finest * cfg.fine_factor) as f64;
    let reference = reference_solution(&x0, &oracle, &sys.op_a, cfg.t_final, fine_dt)?;
    let xbar = reference.extrapolated();
    // Several excited modes so the closed form is checked beyond one scalar.
    let xz0 = SpectralField::from_coeffs((1..=cfg.modes).map(|k| 1.0 / k as f64).collect());
    let exact_linear = hmm_core::averaging::linear_flow(&xz0, &sys.op_a, cfg.t_final)?;
    let mut report = RateReport::new("macro_order", "dt", FitScale::LogLog);
    let mut closed_form_gap: f64 = 0.0;
    for &n in &cfg.divisions {
        let dt = cfg.t_final / n as f64;
        let x = averaged_trajectory(&x0, &oracle, &sys.op_a, dt, n)?.pop().expect("non-empty");
        report.push("p1", dt, x.distance(&xbar), 0.0, 0);
        let xz = averaged_trajectory(&xz0, &zero, &sys.op_a, dt, n)?.pop().expect("non-empty");
        let err = xz.distance(&exact_linear);
        closed_form_gap = closed_form_gap.max((err - resolvent_semigroup_gap(&xz0, sys.op_a.eigenvalues(), dt, n)).abs());
        report.push("zero", dt, err, 0.0, 0);
    }
    report.refit();
    let one_step = averaged_trajectory(&x0, &oracle, &sys.op_a, cfg.t_final, 1)?.pop().expect("non-empty");
    report.extra.insert("one_step_error".into(), one_step.distance(&xbar));
    report.extra.insert("closed_form_max_deviation".into(), closed_form_gap);
    report.extra.insert("reference_richardson_delta".into(), reference.richardson_delta);
    report.extra.insert("reference_fine_dt".into(), fine_dt);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
