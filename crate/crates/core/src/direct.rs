//! Baseline coupled semi-implicit Euler scheme for the full slow-fast system
//! at one small step `dt`, with no scale separation exploited:
//!
//! ```text
//! X' = S_dt (X + dt F(X, Y))
//! Y' = R_{dt/ε} (Y + (dt/ε) G(X, Y) + √(dt/ε) ζ)
//! ```
//!
//! The slow update reads the pre-update `Y`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_positive, Error, Result};
use crate::math;
use crate::noise::{fill_standard_normals, NoiseIncrement, NoiseStreamKey, Stream};
use crate::spectral::SpectralField;
use crate::system::SlowFastSystem;

/// Largest `dt/ε` for which [`run_direct`] considers the fast scale resolved.
pub const FAST_STEP_WARNING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectState {
    pub x: SpectralField,
    pub y: SpectralField,
    pub t: f64,
    pub steps_taken: u64,
}

impl DirectState {
    pub fn new(x0: SpectralField, y0: SpectralField) -> Self {
        Self { x: x0, y: y0, t: 0.0, steps_taken: 0 }
    }
}

struct DirectKernel<'a> {
    sys: &'a SlowFastSystem,
    dt: f64,
    tau: f64,
    sqrt_tau: f64,
    slow_factors: Vec<f64>,
    fast_factors: Vec<f64>,
    x_grid: Vec<f64>,
    y_grid: Vec<f64>,
    pointwise: Vec<f64>,
    f_spec: Vec<f64>,
    g_spec: Vec<f64>,
    noise: Vec<f64>,
}

impl<'a> DirectKernel<'a> {
    fn new(sys: &'a SlowFastSystem, dt: f64, epsilon: f64) -> Result<Self> {
        ensure_positive("dt", dt)?;
        ensure_positive("epsilon", epsilon)?;
        let k = sys.mode_count();
        let tau = dt / epsilon;
        Ok(Self {
            sys,
            dt,
            tau,
            sqrt_tau: math::sqrt(tau),
            slow_factors: sys.op_a.resolvent_factors(dt)?,
            fast_factors: sys.op_b.resolvent_factors(tau)?,
            x_grid: vec![0.0; k],
            y_grid: vec![0.0; k],
            pointwise: vec![0.0; k],
            f_spec: vec![0.0; k],
            g_spec: vec![0.0; k],
            noise: vec![0.0; k],
        })
    }

    /// One coupled step; `self.noise` holds the increment `√τ ζ`.
    fn step(&mut self, x: &mut [f64], y: &mut [f64]) {
        let basis = &self.sys.basis;
        let coeffs = &self.sys.coefficients;
        basis.synthesize(x, &mut self.x_grid);
        basis.synthesize(y, &mut self.y_grid);
        coeffs.f_on_grid(basis.nodes(), &self.x_grid, &self.y_grid, &mut self.pointwise);
        basis.analyze(&self.pointwise, &mut self.f_spec);
        if coeffs.g_vanishes() {
            self.g_spec.iter_mut().for_each(|g| *g = 0.0);
        } else {
            coeffs.g_on_grid(basis.nodes(), &self.x_grid, &self.y_grid, &mut self.pointwise);
            basis.analyze(&self.pointwise, &mut self.g_spec);
        }
        for (xk, (a, f)) in x.iter_mut().zip(self.slow_factors.iter().zip(&self.f_spec)) {
            *xk = a * (*xk + self.dt * f);
        }
        for (yk, ((a, g), w)) in y.iter_mut().zip(self.fast_factors.iter().zip(&self.g_spec).zip(&self.noise)) {
            *yk = a * (*yk + self.tau * g + w);
        }
    }
}

/// One coupled step. `noise.field` is the fast increment `√(dt/ε) ζ`, so
/// `noise.dt` must equal `dt/ε`.
pub fn direct_step(
    sys: &SlowFastSystem,
    state: &DirectState,
    dt: f64,
    epsilon: f64,
    noise: &NoiseIncrement,
) -> Result<DirectState> {
    let k = sys.mode_count();
    for len in [state.x.mode_count(), state.y.mode_count(), noise.field.mode_count()] {
        if len != k {
            return Err(Error::DimensionMismatch { expected: k, found: len });
        }
    }
    let mut kernel = DirectKernel::new(sys, dt, epsilon)?;
    if (noise.dt - kernel.tau).abs() > 1e-12 * kernel.tau {
        return Err(Error::InvalidParameter { name: "noise.dt", value: noise.dt });
    }
    kernel.noise.copy_from_slice(noise.field.coeffs());
    let mut x = state.x.clone().into_coeffs();
    let mut y = state.y.clone().into_coeffs();
    kernel.step(&mut x, &mut y);
    Ok(DirectState {
        x: SpectralField::from_coeffs(x),
        y: SpectralField::from_coeffs(y),
        t: state.t + dt,
        steps_taken: state.steps_taken + 1,
    })
}

/// Key of the fast increment driving step `step` of a direct run.
pub fn direct_key(seed: u64, replica: u32, step: u64) -> NoiseStreamKey {
    NoiseStreamKey::sequential(seed, Stream::Direct, replica, step)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectRun {
    /// `(t_n, X_n)` for every recorded step, starting at `t = 0`.
    pub trajectory: Vec<(f64, SpectralField)>,
    pub final_state: DirectState,
    /// Steps taken, `ceil(T/dt)`.
    pub cost: u64,
    /// Set when `dt/ε` exceeds [`FAST_STEP_WARNING`].
    pub unresolved_fast_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Independent noise replica; `seed` fixed, `replica` varies across
    /// Monte-Carlo samples.
    pub replica: u32,
    /// Record every `record_every`-th state; 0 records only the endpoints.
    pub record_every: u64,
}

impl DirectConfig {
    pub fn new(epsilon: f64, dt: f64, t_final: f64, seed: u64) -> Self {
        Self { epsilon, dt, t_final, seed, replica: 1, record_every: 1 }
    }

    pub fn steps(&self) -> u64 {
        math::ceil(self.t_final / self.dt * (1.0 - 1e-12)) as u64
    }
}

/// `ceil(T/dt)` uniform steps of [`direct_step`]; the last state sits at
/// `t = ceil(T/dt) dt`.
pub fn run_direct(sys: &SlowFastSystem, x0: &SpectralField, y0: &SpectralField, cfg: &DirectConfig) -> Result<DirectRun> {
    ensure_positive("t_final", cfg.t_final)?;
    let k = sys.mode_count();
    for len in [x0.mode_count(), y0.mode_count()] {
        if len != k {
            return Err(Error::DimensionMismatch { expected: k, found: len });
        }
    }
    let mut kernel = DirectKernel::new(sys, cfg.dt, cfg.epsilon)?;
    let steps = cfg.steps();
    let mut x = x0.clone().into_coeffs();
    let mut y = y0.clone().into_coeffs();
    let mut trajectory = vec![(0.0, x0.clone())];
    for n in 0..steps {
        fill_standard_normals(&direct_key(cfg.seed, cfg.replica, n), &mut kernel.noise);
        let s = kernel.sqrt_tau;
        kernel.noise.iter_mut().for_each(|z| *z *= s);
        kernel.step(&mut x, &mut y);
        let done = n + 1;
        let record = (cfg.record_every > 0 && done % cfg.record_every == 0) || done == steps;
        if record {
            trajectory.push((done as f64 * cfg.dt, SpectralField::from_coeffs(x.clone())));
        }
    }
    let final_state = DirectState {
        x: SpectralField::from_coeffs(x),
        y: SpectralField::from_coeffs(y),
        t: steps as f64 * cfg.dt,
        steps_taken: steps,
    };
    Ok(DirectRun {
        trajectory,
        final_state,
        cost: steps,
        unresolved_fast_scale: cfg.dt / cfg.epsilon > FAST_STEP_WARNING,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{averaged_trajectory, SlowOnlyCoefficient};
    use crate::coefficients::{preset_p1, CoefficientSpec};
    use crate::microsolver::stationary_variance_linear;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    #[test]
    fn zero_coefficients_decay_independently() {
        let spec = CoefficientSpec::new(|_, _, _| 0.0, 0.0);
        let sys = SlowFastSystem::laplacian(spec, 4).unwrap();
        let state = DirectState::new(SpectralField::basis(4, 1), SpectralField::basis(4, 2));
        let dt = 0.01;
        let next = direct_step(&sys, &state, dt, 1.0, &NoiseIncrement::zero(4, dt)).unwrap();
        assert_relative_eq!(next.x.mode(1), 1.0 / (1.0 + dt * PI * PI), epsilon = 1e-15);
        assert_relative_eq!(next.y.mode(2), 1.0 / (1.0 + dt * 4.0 * PI * PI), epsilon = 1e-15);
        assert_eq!(next.steps_taken, 1);
        assert!(direct_step(&sys, &state, dt, 1.0, &NoiseIncrement::zero(4, 2.0 * dt)).is_err());
    }

    #[test]
    fn cost_is_ceil_of_horizon() {
        let sys = SlowFastSystem::laplacian(preset_p1(), 3).unwrap();
        let z = SpectralField::zeros(3);
        for (dt, t, expected) in [(0.1, 1.0, 10), (0.3, 1.0, 4), (0.01, 0.05, 5)] {
            let run = run_direct(&sys, &z, &z, &DirectConfig::new(1.0, dt, t, 1)).unwrap();
            assert_eq!(run.cost, expected);
            assert_eq!(run.final_state.steps_taken, expected);
        }
        let coarse = run_direct(&sys, &z, &z, &DirectConfig::new(0.01, 0.1, 0.2, 1)).unwrap();
        assert!(coarse.unresolved_fast_scale);
    }

    #[test]
    fn slow_only_f_matches_averaged_scheme() {
        let spec = CoefficientSpec::new(|xi, x, _| (PI * xi).sin() * (1.0 + x).cos(), 1.0).y_independent();
        let sys = SlowFastSystem::laplacian(spec, 15).unwrap();
        let x0 = SpectralField::basis(15, 1);
        let cfg = DirectConfig::new(0.01, 0.002, 0.1, 9);
        let run = run_direct(&sys, &x0, &SpectralField::zeros(15), &cfg).unwrap();
        let avg = averaged_trajectory(&x0, &SlowOnlyCoefficient::new(&sys).unwrap(), &sys.op_a, 0.002, 50).unwrap();
        assert_eq!(run.trajectory.len(), avg.len());
        for ((_, a), b) in run.trajectory.iter().zip(&avg) {
            assert!(a.distance(b) < 1e-12);
        }
    }

    #[test]
    fn fast_marginal_matches_microsolver_law() {
        // G ≡ 0: each fast mode is the AR(1) chain of the microsolver at
        // τ = dt/ε; compare the long-time second moment of mode 1.
        let sys = SlowFastSystem::laplacian(preset_p1(), 3).unwrap();
        let (eps, dt) = (0.1, 0.005);
        let tau = dt / eps;
        let expected = stationary_variance_linear(1, tau, &sys.op_b).unwrap();
        let samples = 4000;
        let mut ss = 0.0;
        for r in 0..samples {
            let cfg = DirectConfig { replica: r + 1, record_every: 0, ..DirectConfig::new(eps, dt, 0.5, 3) };
            let run = run_direct(&sys, &SpectralField::zeros(3), &SpectralField::zeros(3), &cfg).unwrap();
            ss += run.final_state.y.mode(1).powi(2);
        }
        // After 100 steps with a = 1/(1+0.05π²) the transient is 1e-20 of v.
        let var = ss / samples as f64;
        let se = expected * (2.0 / samples as f64).sqrt();
        assert!((var - expected).abs() < 4.0 * se, "{var} vs {expected}");
    }

    #[test]
    fn deterministic_in_seed() {
        let sys = SlowFastSystem::laplacian(preset_p1(), 7).unwrap();
        let x0 = SpectralField::basis(7, 1);
        let cfg = DirectConfig::new(0.05, 0.001, 0.05, 11);
        let a = run_direct(&sys, &x0, &SpectralField::zeros(7), &cfg).unwrap();
        let b = run_direct(&sys, &x0, &SpectralField::zeros(7), &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_direct(&sys, &x0, &SpectralField::zeros(7), &DirectConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.final_state.y, c.final_state.y);
    }

    #[test]
    fn slow_component_stays_bounded() {
        let sys = SlowFastSystem::laplacian(preset_p1(), 15).unwrap();
        let x0 = SpectralField::basis(15, 1).scaled(5.0);
        let cfg = DirectConfig::new(0.01, 0.001, 1.0, 2);
        let run = run_direct(&sys, &x0, &SpectralField::zeros(15), &cfg).unwrap();
        let bound = x0.norm() + sys.coefficients.sup_f / sys.op_a.smallest();
        assert!(run.trajectory.iter().all(|(_, x)| x.norm() <= bound));
    }
}
