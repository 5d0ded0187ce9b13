//! The averaged coefficient `F̄(x) = ∫ F(x, y) μ^x(dy)` and the deterministic
//! averaged scheme `X̄_{n+1} = S_Δt (X̄_n + Δt F̄(X̄_n))` used as the
//! reference for every error measurement.
//!
//! `F̄` of a Nemytskii `F` is generally not Nemytskii, but when `μ^x` is a
//! centered Gaussian the value of `y(ξ)` at a single point is a scalar
//! Gaussian with variance `σ²(ξ) = Σ_k e_k(ξ)² var_k`, so `F̄(x)(ξ_i)` is a
//! one-dimensional Gaussian integral at every collocation node.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::coefficients::check_weak_dissipativity;
use crate::error::{ensure_positive, Error, Result};
use crate::math;
use crate::microsolver::{stationary_variance_linear_drift, MicroKernel};
use crate::noise::NoiseStreamKey;
use crate::quadrature::GaussHermite;
use crate::spectral::{apply_semigroup, GridField, OperatorSpec, SineBasis, SpectralField};
use crate::system::SlowFastSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// `ν = N(0, (-B)^{-1}/2)`, the invariant law when `G ≡ 0`.
    GaussianNu,
    /// Any other centered Gaussian with diagonal covariance.
    GaussianShifted,
    /// Known only through samples.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasureSpec {
    pub kind: MeasureKind,
    /// Per-mode variances (empty for [`MeasureKind::Sampled`]).
    pub variances: Vec<f64>,
}

impl InvariantMeasureSpec {
    /// `ν`: variances `1 / (2μ_k)`.
    pub fn nu(op_b: &OperatorSpec) -> Self {
        Self {
            kind: MeasureKind::GaussianNu,
            variances: op_b.eigenvalues().iter().map(|mu| 0.5 / mu).collect(),
        }
    }

    /// Invariant law of `dY = (BY - cY) dt + dW`: variances `1 / (2(μ_k + c))`.
    pub fn linear_drift(op_b: &OperatorSpec, c: f64) -> Result<Self> {
        if !(op_b.smallest() + c > 0.0) {
            return Err(Error::InvalidParameter { name: "c", value: c });
        }
        Ok(Self {
            kind: MeasureKind::GaussianShifted,
            variances: op_b.eigenvalues().iter().map(|mu| 0.5 / (mu + c)).collect(),
        })
    }

    /// Exact invariant law of the microsolver with step `τ` and linear drift
    /// `G(y) = -c y` (`c = 0` for `G ≡ 0`).
    pub fn scheme_stationary(op_b: &OperatorSpec, tau: f64, c: f64) -> Result<Self> {
        let variances = (1..=op_b.mode_count())
            .map(|k| stationary_variance_linear_drift(k, tau, c, op_b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind: MeasureKind::GaussianShifted, variances })
    }

    pub fn sampled() -> Self {
        Self { kind: MeasureKind::Sampled, variances: Vec::new() }
    }

    /// `σ²(ξ) = Σ_k 2 sin²(kπξ) var_k`.
    pub fn pointwise_variance(&self, xi: f64) -> Result<f64> {
        if self.kind == MeasureKind::Sampled {
            return Err(Error::Unsupported("pointwise variance of a sampled measure"));
        }
        Ok(self
            .variances
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let s = math::sin((i + 1) as f64 * PI * xi);
                2.0 * s * s * v
            })
            .sum())
    }

    /// `σ²` at every collocation node of `basis`.
    pub fn grid_variances(&self, basis: &SineBasis) -> Result<Vec<f64>> {
        if self.kind == MeasureKind::Sampled {
            return Err(Error::Unsupported("pointwise variance of a sampled measure"));
        }
        if self.variances.len() != basis.mode_count() {
            return Err(Error::DimensionMismatch { expected: basis.mode_count(), found: self.variances.len() });
        }
        let k = basis.mode_count();
        Ok((1..=k)
            .map(|i| {
                (1..=k)
                    .map(|m| {
                        let e = basis.basis_value(i, m);
                        e * e * self.variances[m - 1]
                    })
                    .sum()
            })
            .collect())
    }
}

/// Provider of `F̄(x)` for the averaged scheme.
pub trait AveragedCoefficient {
    fn fbar(&self, x: &SpectralField) -> Result<SpectralField>;
}

/// `F̄ ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroCoefficient {
    pub modes: usize,
}

impl AveragedCoefficient for ZeroCoefficient {
    fn fbar(&self, x: &SpectralField) -> Result<SpectralField> {
        if x.mode_count() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, found: x.mode_count() });
        }
        Ok(SpectralField::zeros(self.modes))
    }
}

/// Wraps a closure as an [`AveragedCoefficient`].
pub struct FnCoefficient<F>(pub F);

impl<F> AveragedCoefficient for FnCoefficient<F>
where
    F: Fn(&SpectralField) -> Result<SpectralField>,
{
    fn fbar(&self, x: &SpectralField) -> Result<SpectralField> {
        (self.0)(x)
    }
}

/// `F̄(x) = F(x, ·)` for a slow reaction that ignores `y`.
pub struct SlowOnlyCoefficient<'a> {
    sys: &'a SlowFastSystem,
}

impl<'a> SlowOnlyCoefficient<'a> {
    pub fn new(sys: &'a SlowFastSystem) -> Result<Self> {
        if sys.coefficients.f_depends_on_y() {
            return Err(Error::Unsupported("slow reaction depends on the fast variable"));
        }
        Ok(Self { sys })
    }
}

impl AveragedCoefficient for SlowOnlyCoefficient<'_> {
    fn fbar(&self, x: &SpectralField) -> Result<SpectralField> {
        let k = self.sys.mode_count();
        let zero = SpectralField::zeros(k);
        crate::coefficients::eval_f(&self.sys.coefficients, &self.sys.basis, x, &zero)
    }
}

/// Gauss–Hermite evaluation of `F̄` under a Gaussian invariant measure.
#[derive(Debug, Clone)]
pub struct GaussianCoefficient<'a> {
    sys: &'a SlowFastSystem,
    grid_variances: Vec<f64>,
    quadrature: GaussHermite,
}

impl<'a> GaussianCoefficient<'a> {
    pub fn new(sys: &'a SlowFastSystem, measure: &InvariantMeasureSpec, order: usize) -> Result<Self> {
        if measure.kind == MeasureKind::Sampled {
            return Err(Error::Unsupported("quadrature needs a Gaussian measure; use the sampled estimator"));
        }
        Ok(Self {
            sys,
            grid_variances: measure.grid_variances(&sys.basis)?,
            quadrature: GaussHermite::new(order)?,
        })
    }

    pub fn grid_variances(&self) -> &[f64] {
        &self.grid_variances
    }

    /// `F̄(x)` at the collocation nodes.
    pub fn grid_values(&self, x: &SpectralField) -> Result<GridField> {
        let xg = self.sys.basis.to_grid(x)?;
        let spec = &self.sys.coefficients;
        let values = self
            .sys
            .basis
            .nodes()
            .iter()
            .zip(xg.values())
            .zip(&self.grid_variances)
            .map(|((&xi, &xv), &s2)| self.quadrature.expect_normal(s2, |y| spec.f(xi, xv, y)))
            .collect();
        Ok(GridField::from_values(values))
    }
}

impl AveragedCoefficient for GaussianCoefficient<'_> {
    fn fbar(&self, x: &SpectralField) -> Result<SpectralField> {
        self.sys.basis.to_spectral(&self.grid_values(x)?)
    }
}

/// `F̄(x)` by Gauss–Hermite quadrature of the given order.
pub fn fbar_gaussian(
    sys: &SlowFastSystem,
    x: &SpectralField,
    measure: &InvariantMeasureSpec,
    order: usize,
) -> Result<SpectralField> {
    GaussianCoefficient::new(sys, measure, order)?.fbar(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledFbarConfig {
    pub tau: f64,
    /// Microsteps discarded before averaging.
    pub warmup: u64,
    /// Microsteps averaged.
    pub window: u64,
    /// Number of batches for the batch-means standard error.
    pub batches: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFbar {
    pub field: SpectralField,
    pub grid_values: GridField,
    /// Batch-means standard error of each grid value.
    pub grid_stderr: Vec<f64>,
}

/// `F̄(x)` as the time average of `F(x, Y_m)` along one long microsolver
/// chain started at `y = 0`; works for any dissipative `G`.
pub fn fbar_sampled(sys: &SlowFastSystem, x: &SpectralField, config: &SampledFbarConfig) -> Result<SampledFbar> {
    ensure_positive("tau", config.tau)?;
    if config.window == 0 {
        return Err(Error::EmptyWindow);
    }
    if config.batches < 2 || config.window < config.batches {
        return Err(Error::InvalidParameter { name: "batches", value: config.batches as f64 });
    }
    if !check_weak_dissipativity(&sys.coefficients, &sys.op_b).holds {
        return Err(Error::NotStrictlyDissipative { lipschitz: sys.coefficients.lipschitz_g_y, mu: sys.op_b.smallest() });
    }
    let k = sys.mode_count();
    let mut kernel = MicroKernel::new(sys, x, config.tau)?;
    let key = NoiseStreamKey::sequential(config.seed, crate::noise::Stream::Micro, 1, 0);
    let mut y = vec![0.0; k];
    for m in 0..config.warmup {
        kernel.advance(&mut y, &key.advanced(m));
    }
    let batch_len = config.window / config.batches;
    let mut batch_means = vec![0.0; k * config.batches as usize];
    let mut values = vec![0.0; k];
    let mut m = config.warmup;
    for b in 0..config.batches as usize {
        let len = if b + 1 == config.batches as usize {
            config.window - batch_len * (config.batches - 1)
        } else {
            batch_len
        };
        let acc = &mut batch_means[b * k..(b + 1) * k];
        for _ in 0..len {
            kernel.advance(&mut y, &key.advanced(m));
            m += 1;
            kernel.f_grid(&y, &mut values);
            for (a, v) in acc.iter_mut().zip(&values) {
                *a += v;
            }
        }
        let inv = 1.0 / len as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    // Overall mean weights batches by length; the batch-means variance uses
    // equal weights, which is exact when `window` divides evenly.
    let nb = config.batches as f64;
    let mut mean = vec![0.0; k];
    let last_len = (config.window - batch_len * (config.batches - 1)) as f64;
    for b in 0..config.batches as usize {
        let w = if b + 1 == config.batches as usize { last_len } else { batch_len as f64 };
        for (mi, bm) in mean.iter_mut().zip(&batch_means[b * k..(b + 1) * k]) {
            *mi += w * bm;
        }
    }
    let inv_window = 1.0 / config.window as f64;
    mean.iter_mut().for_each(|v| *v *= inv_window);
    let stderr = (0..k)
        .map(|i| {
            let bar: f64 = (0..config.batches as usize).map(|b| batch_means[b * k + i]).sum::<f64>() / nb;
            let ss: f64 = (0..config.batches as usize)
                .map(|b| {
                    let d = batch_means[b * k + i] - bar;
                    d * d
                })
                .sum();
            math::sqrt(ss / (nb - 1.0) / nb)
        })
        .collect();
    let grid_values = GridField::from_values(mean);
    let field = sys.basis.to_spectral(&grid_values)?;
    Ok(SampledFbar { field, grid_values, grid_stderr: stderr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedState {
    pub xbar: SpectralField,
    pub step_index: u64,
    pub dt: f64,
}

/// `X̄_{n+1} = S_Δt X̄_n + Δt S_Δt F̄(X̄_n)`.
pub fn averaged_step(
    state: &AveragedState,
    provider: &dyn AveragedCoefficient,
    op_a: &OperatorSpec,
) -> Result<AveragedState> {
    ensure_positive("dt", state.dt)?;
    let forcing = provider.fbar(&state.xbar)?;
    let next = semi_implicit_update(&state.xbar, &forcing, state.dt, op_a)?;
    Ok(AveragedState { xbar: next, step_index: state.step_index + 1, dt: state.dt })
}

/// `S_dt (x + dt·forcing)` mode by mode.
pub(crate) fn semi_implicit_update(
    x: &SpectralField,
    forcing: &SpectralField,
    dt: f64,
    op: &OperatorSpec,
) -> Result<SpectralField> {
    if x.mode_count() != op.mode_count() || forcing.mode_count() != op.mode_count() {
        return Err(Error::DimensionMismatch { expected: op.mode_count(), found: x.mode_count() });
    }
    let coeffs = x
        .coeffs()
        .iter()
        .zip(forcing.coeffs())
        .zip(op.eigenvalues())
        .map(|((xv, fv), ev)| (xv + dt * fv) / (1.0 + dt * ev))
        .collect();
    Ok(SpectralField::from_coeffs(coeffs))
}

/// `X̄_0, …, X̄_steps` of the averaged scheme.
pub fn averaged_trajectory(
    x0: &SpectralField,
    provider: &dyn AveragedCoefficient,
    op_a: &OperatorSpec,
    dt: f64,
    steps: u64,
) -> Result<Vec<SpectralField>> {
    let mut state = AveragedState { xbar: x0.clone(), step_index: 0, dt };
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(x0.clone());
    for _ in 0..steps {
        state = averaged_step(&state, provider, op_a)?;
        out.push(state.xbar.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    /// Averaged scheme at `T` with step `T / steps`.
    pub value: SpectralField,
    /// Same run with `2 * steps`.
    pub refined: SpectralField,
    pub steps: u64,
    /// `|X̄^{h}(T) - X̄^{h/2}(T)|`: change under halving the fine step.
    pub richardson_delta: f64,
}

/// Fine-step stand-in for the exact averaged flow `X̄(T)`.
pub fn reference_solution(
    x0: &SpectralField,
    provider: &dyn AveragedCoefficient,
    op_a: &OperatorSpec,
    t_final: f64,
    fine_dt: f64,
) -> Result<ReferenceSolution> {
    ensure_positive("t_final", t_final)?;
    ensure_positive("fine_dt", fine_dt)?;
    let steps = math::ceil(t_final / fine_dt * (1.0 - 1e-12)).max(1.0) as u64;
    let run = |n: u64| -> Result<SpectralField> {
        let dt = t_final / n as f64;
        let mut state = AveragedState { xbar: x0.clone(), step_index: 0, dt };
        for _ in 0..n {
            state = averaged_step(&state, provider, op_a)?;
        }
        Ok(state.xbar)
    };
    let value = run(steps)?;
    let refined = run(2 * steps)?;
    Ok(ReferenceSolution { richardson_delta: value.distance(&refined), value, refined, steps })
}

impl ReferenceSolution {
    /// First-order Richardson extrapolation `2 X̄^{h/2} - X̄^{h}`.
    pub fn extrapolated(&self) -> SpectralField {
        let mut out = self.refined.scaled(2.0);
        out.axpy(-1.0, &self.value);
        out
    }
}

/// Exact solution of the linear averaged equation when `F̄ ≡ 0`.
pub fn linear_flow(x0: &SpectralField, op_a: &OperatorSpec, t: f64) -> Result<SpectralField> {
    apply_semigroup(x0, t, op_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{preset_p1, preset_p3, CoefficientSpec};
    use crate::quadrature::DEFAULT_ORDER;
    use approx::assert_relative_eq;

    fn cos_system(k: usize) -> SlowFastSystem {
        SlowFastSystem::laplacian(CoefficientSpec::new(|_, _, y: f64| y.cos(), 1.0), k).unwrap()
    }

    #[test]
    fn nu_variances_are_half_inverse_eigenvalues() {
        let op = OperatorSpec::laplacian(5).unwrap();
        let nu = InvariantMeasureSpec::nu(&op);
        for (v, mu) in nu.variances.iter().zip(op.eigenvalues()) {
            assert_eq!(*v, 0.5 / mu);
        }
    }

    #[test]
    fn pointwise_variance_midpoint_series() {
        // Only odd modes are non-zero at ξ = 1/2: Σ_{k odd} 1/(π²k²) = 1/8,
        // with a tail beyond K of about 1/(2π²K).
        let nu = InvariantMeasureSpec::nu(&OperatorSpec::laplacian(63).unwrap());
        let s = nu.pointwise_variance(0.5).unwrap();
        assert!((s - 0.125).abs() < 1e-3, "{s}");
        let big = InvariantMeasureSpec::nu(&OperatorSpec::laplacian(20_001).unwrap());
        assert!((big.pointwise_variance(0.5).unwrap() - 0.125).abs() < 1e-5);
        assert!(nu.pointwise_variance(1e-9).unwrap() < 1e-12);
        assert!(nu.pointwise_variance(0.0).unwrap() == 0.0);
        // Symmetric about 1/2.
        assert_relative_eq!(nu.pointwise_variance(0.3).unwrap(), nu.pointwise_variance(0.7).unwrap(), epsilon = 1e-15);
        assert!(InvariantMeasureSpec::sampled().pointwise_variance(0.5).is_err());
    }

    #[test]
    fn grid_variances_match_pointwise() {
        let sys = cos_system(15);
        let nu = InvariantMeasureSpec::nu(&sys.op_b);
        let grid = nu.grid_variances(&sys.basis).unwrap();
        for (s, &xi) in grid.iter().zip(sys.basis.nodes()) {
            assert_relative_eq!(*s, nu.pointwise_variance(xi).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn odd_integrand_averages_to_zero() {
        let sys = SlowFastSystem::laplacian(CoefficientSpec::new(|_, _, y: f64| y.sin(), 1.0), 15).unwrap();
        let nu = InvariantMeasureSpec::nu(&sys.op_b);
        let fbar = fbar_gaussian(&sys, &SpectralField::basis(15, 1), &nu, DEFAULT_ORDER).unwrap();
        assert!(fbar.norm() < 1e-14);
    }

    #[test]
    fn cosine_average_is_characteristic_function() {
        let sys = cos_system(63);
        let nu = InvariantMeasureSpec::nu(&sys.op_b);
        let coeff = GaussianCoefficient::new(&sys, &nu, DEFAULT_ORDER).unwrap();
        let grid = coeff.grid_values(&SpectralField::zeros(63)).unwrap();
        let s2 = nu.pointwise_variance(0.5).unwrap();
        assert_relative_eq!(grid.values()[31], (-s2 / 2.0).exp(), epsilon = 1e-12);
        assert!((grid.values()[31] - (-1.0f64 / 16.0).exp()).abs() < 5e-4);
    }

    #[test]
    fn y_independent_f_is_unchanged() {
        let spec = CoefficientSpec::new(|xi, x, _| (x + xi).sin(), 1.0).y_independent();
        let sys = SlowFastSystem::laplacian(spec, 15).unwrap();
        let x = SpectralField::basis(15, 2).scaled(0.4);
        let nu = InvariantMeasureSpec::nu(&sys.op_b);
        let a = fbar_gaussian(&sys, &x, &nu, DEFAULT_ORDER).unwrap();
        let b = SlowOnlyCoefficient::new(&sys).unwrap().fbar(&x).unwrap();
        assert!(a.distance(&b) < 1e-14);
        assert!(SlowOnlyCoefficient::new(&cos_system(3)).is_err());
    }

    #[test]
    fn sampled_measure_rejected_by_quadrature() {
        let sys = cos_system(7);
        let r = fbar_gaussian(&sys, &SpectralField::zeros(7), &InvariantMeasureSpec::sampled(), 40);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn quadrature_order_converged() {
        let sys = SlowFastSystem::laplacian(preset_p1(), 31).unwrap();
        let nu = InvariantMeasureSpec::nu(&sys.op_b);
        let x = SpectralField::basis(31, 1).scaled(0.8);
        let a = fbar_gaussian(&sys, &x, &nu, 40).unwrap();
        let b = fbar_gaussian(&sys, &x, &nu, 80).unwrap();
        assert!(a.distance(&b) < 1e-8);
    }

    #[test]
    fn fbar_is_lipschitz_in_x() {
        let sys = SlowFastSystem::laplacian(preset_p1(), 31).unwrap();
        let coeff = GaussianCoefficient::new(&sys, &InvariantMeasureSpec::nu(&sys.op_b), 40).unwrap();
        let lf = sys.coefficients.lipschitz_f_x;
        for s in 0..20u64 {
            let mut c1 = vec![0.0; 31];
            let mut c2 = vec![0.0; 31];
            crate::noise::fill_standard_normals(&NoiseStreamKey::sequential(s, crate::noise::Stream::Initial, 1, 0), &mut c1);
            crate::noise::fill_standard_normals(&NoiseStreamKey::sequential(s, crate::noise::Stream::Initial, 2, 0), &mut c2);
            let x1 = SpectralField::from_coeffs(c1).scaled(0.3);
            let x2 = SpectralField::from_coeffs(c2).scaled(0.3);
            let f1 = coeff.fbar(&x1).unwrap();
            let f2 = coeff.fbar(&x2).unwrap();
            assert!(f1.distance(&f2) <= lf * x1.distance(&x2) + 1e-12);
            assert!(f1.norm() <= sys.coefficients.sup_f + 1e-12);
        }
    }

    #[test]
    fn sampled_matches_quadrature_without_fast_drift() {
        let sys = SlowFastSystem::laplacian(preset_p1(), 15).unwrap();
        let tau = 0.05;
        let x = SpectralField::basis(15, 1).scaled(0.5);
        let cfg = SampledFbarConfig { tau, warmup: 200, window: 200_000, batches: 50, seed: 3 };
        let sampled = fbar_sampled(&sys, &x, &cfg).unwrap();
        let law = InvariantMeasureSpec::scheme_stationary(&sys.op_b, tau, 0.0).unwrap();
        let exact = GaussianCoefficient::new(&sys, &law, 40).unwrap().grid_values(&x).unwrap();
        let mid = 7;
        let diff = (sampled.grid_values.values()[mid] - exact.values()[mid]).abs();
        assert!(diff < 4.0 * sampled.grid_stderr[mid], "{diff} vs {}", sampled.grid_stderr[mid]);
    }

    #[test]
    fn sampled_matches_shifted_quadrature_with_linear_drift() {
        let c = 3.0;
        let sys = SlowFastSystem::laplacian(preset_p3(c), 15).unwrap();
        let tau = 0.05;
        let x = SpectralField::basis(15, 1).scaled(0.5);
        let cfg = SampledFbarConfig { tau, warmup: 200, window: 200_000, batches: 50, seed: 4 };
        let sampled = fbar_sampled(&sys, &x, &cfg).unwrap();
        let law = InvariantMeasureSpec::scheme_stationary(&sys.op_b, tau, c).unwrap();
        let exact = GaussianCoefficient::new(&sys, &law, 40).unwrap().grid_values(&x).unwrap();
        for i in [3usize, 7, 11] {
            let diff = (sampled.grid_values.values()[i] - exact.values()[i]).abs();
            assert!(diff < 4.0 * sampled.grid_stderr[i], "node {i}: {diff} vs {}", sampled.grid_stderr[i]);
        }
        // The scheme law approaches the continuous one as τ -> 0.
        let cont = InvariantMeasureSpec::linear_drift(&sys.op_b, c).unwrap();
        let fine = InvariantMeasureSpec::scheme_stationary(&sys.op_b, 1e-8, c).unwrap();
        for (a, b) in cont.variances.iter().zip(&fine.variances) {
            assert_relative_eq!(a, b, max_relative = 1e-4);
        }
    }

    #[test]
    fn sampled_rejects_empty_window() {
        let sys = SlowFastSystem::laplacian(preset_p1(), 7).unwrap();
        let cfg = SampledFbarConfig { tau: 0.1, warmup: 10, window: 0, batches: 10, seed: 1 };
        assert_eq!(fbar_sampled(&sys, &SpectralField::zeros(7), &cfg), Err(Error::EmptyWindow));
    }

    #[test]
    fn averaged_step_with_zero_forcing() {
        let op = OperatorSpec::laplacian(4).unwrap();
        let zero = ZeroCoefficient { modes: 4 };
        let state = AveragedState { xbar: SpectralField::basis(4, 1), step_index: 0, dt: 1.0 / (PI * PI) };
        let next = averaged_step(&state, &zero, &op).unwrap();
        assert_relative_eq!(next.xbar.mode(1), 0.5, epsilon = 1e-15);
        let x0 = SpectralField::from_coeffs(vec![1.0, -1.0, 0.5, 2.0]);
        let traj = averaged_trajectory(&x0, &zero, &op, 0.01, 7).unwrap();
        for k in 1..=4 {
            let expected = x0.mode(k) * (1.0 + 0.01 * op.eigenvalues()[k - 1]).powi(-7);
            assert_relative_eq!(traj[7].mode(k), expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn averaged_scheme_stays_bounded() {
        let sys = SlowFastSystem::laplacian(preset_p1(), 15).unwrap();
        let coeff = GaussianCoefficient::new(&sys, &InvariantMeasureSpec::nu(&sys.op_b), 40).unwrap();
        let x0 = SpectralField::basis(15, 1).scaled(5.0);
        let dt = 0.05;
        let traj = averaged_trajectory(&x0, &coeff, &sys.op_a, dt, 2000).unwrap();
        let lambda = sys.op_a.smallest();
        // |X̄_n| ≤ |x0| + sup_f / λ, uniformly in n.
        for x in &traj {
            assert!(x.norm() <= x0.norm() + 1.0 / lambda + 1e-12);
        }
    }

    #[test]
    fn reference_converges_to_linear_flow() {
        let op = OperatorSpec::laplacian(6).unwrap();
        let zero = ZeroCoefficient { modes: 6 };
        let x0 = SpectralField::from_coeffs(vec![1.0, 0.5, 0.25, 0.1, 0.05, 0.01]);
        let t = 0.2;
        let exact = linear_flow(&x0, &op, t).unwrap();
        let coarse = reference_solution(&x0, &zero, &op, t, 1e-3).unwrap();
        let fine = reference_solution(&x0, &zero, &op, t, 5e-4).unwrap();
        let e1 = coarse.value.distance(&exact);
        let e2 = fine.value.distance(&exact);
        assert!(e2 < e1 && e1 < 1e-2);
        assert!((e1 / e2 - 2.0).abs() < 0.2, "first order: {}", e1 / e2);
        assert_eq!(coarse.steps, 200);
        assert!(coarse.richardson_delta > 0.0);
        assert_eq!(coarse, reference_solution(&x0, &zero, &op, t, 1e-3).unwrap());
        // Extrapolation removes the first-order term.
        assert!(coarse.extrapolated().distance(&exact) < 0.05 * e2);
    }
}
