//! Fast-scale semi-implicit Euler scheme with the slow component frozen:
//!
//! ```text
//! Y_{m+1} = R_τ (Y_m + τ G(x, Y_m) + √τ ζ_{m+1}),   R_τ = (I - τB)^{-1},
//! ```
//!
//! with `τ = δt/ε` and `ζ` standard cylindrical Gaussian increments.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_positive, Error, Result};
use crate::math;
use crate::noise::{fill_standard_normals, NoiseIncrement, NoiseStreamKey};
use crate::spectral::{OperatorSpec, SpectralField};
use crate::system::SlowFastSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub y: SpectralField,
    pub frozen_x: SpectralField,
    /// Effective step `τ = δt/ε`.
    pub tau: f64,
    pub step_index: u64,
}

/// Precomputed resolvent factors, frozen slow grid values and scratch
/// buffers for stepping one or more fast chains at a fixed `(x, τ)`.
pub(crate) struct MicroKernel<'a> {
    sys: &'a SlowFastSystem,
    tau: f64,
    sqrt_tau: f64,
    factors: Vec<f64>,
    x_grid: Vec<f64>,
    y_grid: Vec<f64>,
    pointwise: Vec<f64>,
    drift: Vec<f64>,
    noise: Vec<f64>,
}

impl<'a> MicroKernel<'a> {
    pub(crate) fn new(sys: &'a SlowFastSystem, frozen_x: &SpectralField, tau: f64) -> Result<Self> {
        ensure_positive("tau", tau)?;
        let k = sys.mode_count();
        let x_grid = sys.basis.to_grid(frozen_x)?.into_values();
        Ok(Self {
            sys,
            tau,
            sqrt_tau: math::sqrt(tau),
            factors: sys.op_b.resolvent_factors(tau)?,
            x_grid,
            y_grid: vec![0.0; k],
            pointwise: vec![0.0; k],
            drift: vec![0.0; k],
            noise: vec![0.0; k],
        })
    }

    /// One step driven by the standard normals of `key`.
    pub(crate) fn advance(&mut self, y: &mut [f64], key: &NoiseStreamKey) {
        fill_standard_normals(key, &mut self.noise);
        self.advance_with_standard(y);
    }

    /// One step driven by the standard normals already in `self.noise`.
    fn advance_with_standard(&mut self, y: &mut [f64]) {
        let tau = self.tau;
        if self.sys.coefficients.g_vanishes() {
            for ((yk, a), z) in y.iter_mut().zip(&self.factors).zip(&self.noise) {
                *yk = a * (*yk + self.sqrt_tau * z);
            }
        } else {
            self.sys.basis.synthesize(y, &mut self.y_grid);
            self.sys
                .coefficients
                .g_on_grid(self.sys.basis.nodes(), &self.x_grid, &self.y_grid, &mut self.pointwise);
            self.sys.basis.analyze(&self.pointwise, &mut self.drift);
            for (((yk, a), z), g) in y.iter_mut().zip(&self.factors).zip(&self.noise).zip(&self.drift) {
                *yk = a * (*yk + tau * g + self.sqrt_tau * z);
            }
        }
    }

    /// Add the grid values of `f(ξ, x, y)` to `acc`.
    pub(crate) fn accumulate_f(&mut self, y: &[f64], acc: &mut [f64]) {
        self.sys.basis.synthesize(y, &mut self.y_grid);
        self.sys
            .coefficients
            .f_on_grid(self.sys.basis.nodes(), &self.x_grid, &self.y_grid, &mut self.pointwise);
        for (a, v) in acc.iter_mut().zip(&self.pointwise) {
            *a += v;
        }
    }

    /// Grid values of `f(ξ, x, y)` into `out`.
    pub(crate) fn f_grid(&mut self, y: &[f64], out: &mut [f64]) {
        self.sys.basis.synthesize(y, &mut self.y_grid);
        self.sys.coefficients.f_on_grid(self.sys.basis.nodes(), &self.x_grid, &self.y_grid, out);
    }
}

/// Reusable stepper for fast chains at a fixed `(x, τ)`: avoids rebuilding
/// the resolvent factors and frozen grid values on every step.
pub struct MicroChain<'a> {
    kernel: MicroKernel<'a>,
}

impl<'a> MicroChain<'a> {
    pub fn new(sys: &'a SlowFastSystem, frozen_x: &SpectralField, tau: f64) -> Result<Self> {
        Ok(Self { kernel: MicroKernel::new(sys, frozen_x, tau)? })
    }

    pub fn tau(&self) -> f64 {
        self.kernel.tau
    }

    /// Advance `y` (spectral coefficients) by one step driven by `key`.
    ///
    /// Panics if `y` does not hold one coefficient per mode.
    pub fn step(&mut self, y: &mut [f64], key: &NoiseStreamKey) {
        assert_eq!(y.len(), self.kernel.sys.mode_count(), "fast state has the wrong number of modes");
        self.kernel.advance(y, key);
    }

    /// Grid values of `f(ξ, x, y)`.
    pub fn f_grid(&mut self, y: &[f64], out: &mut [f64]) {
        self.kernel.f_grid(y, out);
    }
}

/// One microstep. `noise.field` is the increment `√τ ζ`, so `noise.dt`
/// must equal the state's `τ`.
pub fn micro_step(sys: &SlowFastSystem, state: &MicroState, noise: &NoiseIncrement) -> Result<MicroState> {
    let k = sys.mode_count();
    for len in [state.y.mode_count(), state.frozen_x.mode_count(), noise.field.mode_count()] {
        if len != k {
            return Err(Error::DimensionMismatch { expected: k, found: len });
        }
    }
    if (noise.dt - state.tau).abs() > 1e-12 * state.tau {
        return Err(Error::InvalidParameter { name: "noise.dt", value: noise.dt });
    }
    let mut kernel = MicroKernel::new(sys, &state.frozen_x, state.tau)?;
    let inv = 1.0 / kernel.sqrt_tau;
    for (z, w) in kernel.noise.iter_mut().zip(noise.field.coeffs()) {
        *z = w * inv;
    }
    let mut y = state.y.clone().into_coeffs();
    if sys.coefficients.g_vanishes() {
        // Apply the increment directly rather than rescaling it twice.
        for ((yk, a), w) in y.iter_mut().zip(&kernel.factors).zip(noise.field.coeffs()) {
            *yk = a * (*yk + w);
        }
    } else {
        kernel.advance_with_standard(&mut y);
    }
    Ok(MicroState {
        y: SpectralField::from_coeffs(y),
        frozen_x: state.frozen_x.clone(),
        tau: state.tau,
        step_index: state.step_index + 1,
    })
}

/// Pathwise contraction rate of one microstep under strict dissipativity:
/// `|r_{m+1}|² ≤ ρ |r_m|²` with `ρ = (1 + τ L_g) / (1 + τ(2μ - L_g))`.
pub fn contraction_factor(tau: f64, lipschitz_g: f64, mu: f64) -> Result<f64> {
    ensure_positive("tau", tau)?;
    ensure_positive("mu", mu)?;
    if !(lipschitz_g >= 0.0) {
        return Err(Error::InvalidParameter { name: "lipschitz_g", value: lipschitz_g });
    }
    if lipschitz_g >= mu {
        return Err(Error::NotStrictlyDissipative { lipschitz: lipschitz_g, mu });
    }
    Ok((1.0 + tau * lipschitz_g) / (1.0 + tau * (2.0 * mu - lipschitz_g)))
}

/// Exponential rate `c` with `ρ = e^{-2cτ}`.
pub fn contraction_rate(tau: f64, lipschitz_g: f64, mu: f64) -> Result<f64> {
    Ok(-math::ln(contraction_factor(tau, lipschitz_g, mu)?) / (2.0 * tau))
}

/// Stationary variance of mode `k` (1-based) for `G ≡ 0`: the fixed point of
/// `v = a²(v + τ)`, i.e. `1 / (2μ_k + τμ_k²)`.
pub fn stationary_variance_linear(k: usize, tau: f64, op_b: &OperatorSpec) -> Result<f64> {
    stationary_variance_linear_drift(k, tau, 0.0, op_b)
}

/// Stationary variance of mode `k` for the linear drift `G(y) = -c y`:
/// `a²τ / (1 - a²(1 - τc)²)` with `a = 1/(1 + τμ_k)`.
pub fn stationary_variance_linear_drift(k: usize, tau: f64, c: f64, op_b: &OperatorSpec) -> Result<f64> {
    ensure_positive("tau", tau)?;
    if k == 0 || k > op_b.mode_count() {
        return Err(Error::InvalidParameter { name: "k", value: k as f64 });
    }
    let a = 1.0 / (1.0 + tau * op_b.eigenvalues()[k - 1]);
    let contraction = a * (1.0 - tau * c);
    if contraction.abs() >= 1.0 {
        return Err(Error::InvalidParameter { name: "c", value: c });
    }
    Ok(a * a * tau / (1.0 - contraction * contraction))
}

/// Variance of mode `k` after `m` steps from `y0 = 0` with `G ≡ 0`:
/// `a²τ (1 - a^{2m}) / (1 - a²)`.
pub fn transient_variance_linear(k: usize, tau: f64, m: u64, op_b: &OperatorSpec) -> Result<f64> {
    let v = stationary_variance_linear(k, tau, op_b)?;
    let a = 1.0 / (1.0 + tau * op_b.eigenvalues()[k - 1]);
    Ok(v * (1.0 - math::powi(a, 2 * m as i32)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroRun {
    pub state: MicroState,
    /// Average of `F(x, Y_m)` over `m ∈ [max(warmup, 1), steps]`; `None` when
    /// that window is empty.
    pub average_f: Option<SpectralField>,
    pub window_len: u64,
}

/// Advance `steps` microsteps from `y0` with `x` frozen, using the increments
/// `first_key, first_key.advanced(1), …`, and average `F(x, Y_m)` over the
/// post-warm-up steps.
pub fn run_micro(
    sys: &SlowFastSystem,
    y0: &SpectralField,
    frozen_x: &SpectralField,
    tau: f64,
    steps: u64,
    warmup: u64,
    first_key: &NoiseStreamKey,
) -> Result<MicroRun> {
    let k = sys.mode_count();
    if y0.mode_count() != k {
        return Err(Error::DimensionMismatch { expected: k, found: y0.mode_count() });
    }
    let mut kernel = MicroKernel::new(sys, frozen_x, tau)?;
    let mut y = y0.clone().into_coeffs();
    let mut acc = vec![0.0; k];
    let start = warmup.max(1);
    for m in 0..steps {
        kernel.advance(&mut y, &first_key.advanced(m));
        if m + 1 >= start {
            kernel.accumulate_f(&y, &mut acc);
        }
    }
    let window_len = if steps >= start { steps - start + 1 } else { 0 };
    let average_f = (window_len > 0).then(|| {
        let inv = 1.0 / window_len as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        let mut out = vec![0.0; k];
        sys.basis.analyze(&acc, &mut out);
        SpectralField::from_coeffs(out)
    });
    Ok(MicroRun {
        state: MicroState {
            y: SpectralField::from_coeffs(y),
            frozen_x: frozen_x.clone(),
            tau,
            step_index: steps,
        },
        average_f,
        window_len,
    })
}
