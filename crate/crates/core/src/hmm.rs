//! HMM driver: the macrosolver `X_{n+1} = S_Δt (X_n + Δt F̃_n)` fed by the
//! on-the-fly estimator
//!
//! ```text
//! F̃_n = 1/(MN) Σ_{j=1..M} Σ_{m=n_T..n_T+N-1} F(X_n, Y_{n,m,j}),
//! ```
//!
//! where each replica advances `m_0 = n_T + N - 1` microsteps per macro step
//! and starts from the state it reached at the end of the previous one.

use alloc::vec;
use alloc::vec::Vec;

use crate::averaging::semi_implicit_update;
use crate::coefficients::{check_strict_dissipativity, check_weak_dissipativity};
use crate::error::{ensure_positive, Error, Result};
use crate::math;
use crate::microsolver::MicroKernel;
use crate::noise::derive_key;
use crate::spectral::{OperatorSpec, SpectralField};
use crate::system::SlowFastSystem;

/// Upper bound on `τ = δt/ε` accepted by [`HmmParams::new`].
pub const DEFAULT_TAU_BOUND: f64 = 1.0;

/// `floor(v)` that does not lose a whole unit to rounding in `T / Δt`.
fn floor_count(v: f64) -> u64 {
    math::floor(v * (1.0 + 1e-12)) as u64
}

/// `ceil(v)` that does not gain a whole unit from rounding in `tol^p`.
fn ceil_count(v: f64) -> u64 {
    math::ceil(v * (1.0 - 1e-12)) as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmmParams {
    pub epsilon: f64,
    /// Macro step `Δt`.
    pub macro_dt: f64,
    /// Micro step `δt`.
    pub micro_dt: f64,
    pub t_final: f64,
    /// Averaging window `N`.
    pub window: u64,
    /// Replica count `M`.
    pub replicas: u64,
    /// Warm-up `n_T`.
    pub warmup: u64,
}

impl HmmParams {
    pub fn new(
        epsilon: f64,
        macro_dt: f64,
        micro_dt: f64,
        t_final: f64,
        window: u64,
        replicas: u64,
        warmup: u64,
    ) -> Result<Self> {
        Self::with_tau_bound(epsilon, macro_dt, micro_dt, t_final, window, replicas, warmup, DEFAULT_TAU_BOUND)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_tau_bound(
        epsilon: f64,
        macro_dt: f64,
        micro_dt: f64,
        t_final: f64,
        window: u64,
        replicas: u64,
        warmup: u64,
        tau_bound: f64,
    ) -> Result<Self> {
        ensure_positive("epsilon", epsilon)?;
        ensure_positive("macro_dt", macro_dt)?;
        ensure_positive("micro_dt", micro_dt)?;
        ensure_positive("t_final", t_final)?;
        if window == 0 {
            return Err(Error::InvalidParameter { name: "window", value: 0.0 });
        }
        if replicas == 0 || replicas > u32::MAX as u64 {
            return Err(Error::InvalidParameter { name: "replicas", value: replicas as f64 });
        }
        // n_T = 0 would put the carried-over state inside the window.
        if warmup == 0 {
            return Err(Error::InvalidParameter { name: "warmup", value: 0.0 });
        }
        let params = Self { epsilon, macro_dt, micro_dt, t_final, window, replicas, warmup };
        if params.tau() > tau_bound {
            return Err(Error::InvalidParameter { name: "tau", value: params.tau() });
        }
        Ok(params)
    }

    /// `τ = δt / ε`.
    pub fn tau(&self) -> f64 {
        self.micro_dt / self.epsilon
    }

    /// `n_0 = floor(T / Δt)`.
    pub fn macro_steps(&self) -> u64 {
        floor_count(self.t_final / self.macro_dt)
    }

    /// `m_0 = n_T + N - 1`.
    pub fn micro_steps_per_macro(&self) -> u64 {
        self.warmup + self.window - 1
    }

    /// Microsteps per unit time, `M m_0 / Δt`.
    pub fn cost_per_unit_time(&self) -> f64 {
        (self.replicas * self.micro_steps_per_macro()) as f64 / self.macro_dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmState {
    pub x: SpectralField,
    /// Carried microstates `Y_{n,0,j}`, one per replica.
    pub micro_states: Vec<SpectralField>,
    pub n: u64,
    pub cost_counter: u64,
}

impl HmmState {
    pub fn new(x0: SpectralField, y0: &SpectralField, replicas: u64) -> Self {
        Self { x: x0, micro_states: vec![y0.clone(); replicas as usize], n: 0, cost_counter: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub macro_steps: u64,
    pub total_micro_steps: u64,
    /// `M m_0 / Δt`.
    pub cost_per_unit_time: f64,
    /// Steps a direct solver needs at the same `δt`: `ceil(T / δt)`.
    pub direct_steps_same_micro_dt: u64,
}

/// Noise configuration of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorNoise {
    pub master_seed: u64,
    /// Drive every replica with the noise of replica 1. Only useful to check
    /// that replica independence is what reduces the variance.
    pub shared_replicas: bool,
}

impl EstimatorNoise {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed, shared_replicas: false }
    }
}

/// `F̃_n` at frozen `x`; advances every carried microstate by `m_0` steps.
pub fn estimate_ftilde(
    sys: &SlowFastSystem,
    x_frozen: &SpectralField,
    micro_states: &mut [SpectralField],
    params: &HmmParams,
    noise: &EstimatorNoise,
    n: u64,
) -> Result<SpectralField> {
    let k = sys.mode_count();
    if micro_states.len() as u64 != params.replicas {
        return Err(Error::InvalidParameter { name: "micro_states", value: micro_states.len() as f64 });
    }
    let m0 = params.micro_steps_per_macro();
    let mut kernel = MicroKernel::new(sys, x_frozen, params.tau())?;
    let mut acc = vec![0.0; k];
    for (j, state) in micro_states.iter_mut().enumerate() {
        if state.mode_count() != k {
            return Err(Error::DimensionMismatch { expected: k, found: state.mode_count() });
        }
        let replica = if noise.shared_replicas { 1 } else { j as u32 + 1 };
        let y = state.coeffs_mut();
        for m in 0..m0 {
            let key = derive_key(noise.master_seed, m0, n, m, replica)?;
            debug_assert!(key.macro_step == n && key.global_index / m0 == n);
            kernel.advance(y, &key);
            // Y_{n,m+1,j} lies in the window when m + 1 ∈ [n_T, m_0].
            if m + 1 >= params.warmup {
                kernel.accumulate_f(y, &mut acc);
            }
        }
    }
    let inv = 1.0 / (params.replicas * params.window) as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    let mut out = vec![0.0; k];
    sys.basis.analyze(&acc, &mut out);
    Ok(SpectralField::from_coeffs(out))
}

/// `X_{n+1} = S_Δt X_n + Δt S_Δt F̃_n`; the micro bookkeeping is updated by
/// [`hmm_step`].
pub fn macro_step(x: &SpectralField, ftilde: &SpectralField, params: &HmmParams, op_a: &OperatorSpec) -> Result<SpectralField> {
    semi_implicit_update(x, ftilde, params.macro_dt, op_a)
}

/// One full HMM step: estimator, then macrosolver.
pub fn hmm_step(sys: &SlowFastSystem, state: &mut HmmState, params: &HmmParams, noise: &EstimatorNoise) -> Result<SpectralField> {
    let ftilde = estimate_ftilde(sys, &state.x, &mut state.micro_states, params, noise, state.n)?;
    state.x = macro_step(&state.x, &ftilde, params, &sys.op_a)?;
    state.n += 1;
    state.cost_counter += params.replicas * params.micro_steps_per_macro();
    Ok(ftilde)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmRun {
    /// `X_0, …, X_{n_0}`.
    pub trajectory: Vec<SpectralField>,
    pub final_state: HmmState,
    pub cost: CostReport,
    /// `false` when only weak dissipativity holds, in which case the
    /// discrete fast invariant law need not be unique.
    pub strictly_dissipative: bool,
}

impl HmmRun {
    pub fn final_x(&self) -> &SpectralField {
        self.trajectory.last().expect("trajectory holds X_0")
    }
}

/// Run the HMM up to `n_0 = floor(T/Δt)` macro steps.
pub fn run_hmm(
    sys: &SlowFastSystem,
    x0: &SpectralField,
    y0: &SpectralField,
    params: &HmmParams,
    noise: &EstimatorNoise,
) -> Result<HmmRun> {
    let wd = check_weak_dissipativity(&sys.coefficients, &sys.op_b);
    if !wd.holds {
        return Err(Error::NotStrictlyDissipative {
            lipschitz: sys.coefficients.lipschitz_g_y,
            mu: sys.op_b.smallest(),
        });
    }
    let strictly_dissipative = check_strict_dissipativity(&sys.coefficients, &sys.op_b).holds;
    let n0 = params.macro_steps();
    let mut state = HmmState::new(x0.clone(), y0, params.replicas);
    let mut trajectory = Vec::with_capacity(n0 as usize + 1);
    trajectory.push(x0.clone());
    for _ in 0..n0 {
        hmm_step(sys, &mut state, params, noise)?;
        trajectory.push(state.x.clone());
    }
    debug_assert_eq!(state.cost_counter, n0 * params.replicas * params.micro_steps_per_macro());
    let cost = CostReport {
        macro_steps: n0,
        total_micro_steps: state.cost_counter,
        cost_per_unit_time: params.cost_per_unit_time(),
        direct_steps_same_micro_dt: math::ceil(params.t_final / params.micro_dt * (1.0 - 1e-12)) as u64,
    };
    Ok(HmmRun { trajectory, final_state: state, cost, strictly_dissipative })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Strong,
    Weak,
}

/// Which of `M`, `N` carries the variance reduction in the strong regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrongBranch {
    /// `M = 1`, long window `N`.
    SingleReplica,
    /// `N = 1`, many replicas `M`.
    SingleWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRequest {
    pub tol: f64,
    pub epsilon: f64,
    pub regime: Regime,
    pub r: f64,
    pub kappa: f64,
    pub t_final: f64,
    pub strong_branch: StrongBranch,
    /// Constant `c` in the warm-up rule `e^{-c n_T τ} ≈ tol`; see
    /// [`crate::microsolver::contraction_rate`] for its value under strict
    /// dissipativity.
    pub decay_rate: f64,
}

impl ParamRequest {
    pub fn new(tol: f64, epsilon: f64, regime: Regime) -> Self {
        Self {
            tol,
            epsilon,
            regime,
            r: 0.0,
            kappa: 0.0,
            t_final: 1.0,
            strong_branch: StrongBranch::SingleReplica,
            decay_rate: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter { name: "tol", value: self.tol });
        }
        ensure_positive("epsilon", self.epsilon)?;
        ensure_positive("t_final", self.t_final)?;
        ensure_positive("decay_rate", self.decay_rate)?;
        let r_max = match self.regime {
            Regime::Strong => 0.5,
            Regime::Weak => 1.0,
        };
        if !(self.r >= 0.0 && self.r < r_max) {
            return Err(Error::InvalidParameter { name: "r", value: self.r });
        }
        if !(self.kappa >= 0.0 && self.kappa < 0.5) {
            return Err(Error::InvalidParameter { name: "kappa", value: self.kappa });
        }
        Ok(())
    }
}

/// Parameters balancing every numerical error term against `tol`:
/// `Δt = tol^{1/(1-r)}`, `τ = tol^{1/(1/2-κ)}`, `n_T = ln(1/tol) / (c τ)`,
/// and in the strong regime either `N = tol^{-2 + 1/(1-r) - 1/(1/2-κ)}`
/// (`M = 1`) or `M = tol^{1/(1-r) - 2}` (`N = 1`). All proportionality
/// constants are 1 and counts are rounded up.
pub fn choose_params(req: &ParamRequest) -> Result<HmmParams> {
    req.validate()?;
    let p_macro = 1.0 / (1.0 - req.r);
    let p_micro = 1.0 / (0.5 - req.kappa);
    let macro_dt = math::powf(req.tol, p_macro);
    let tau = math::powf(req.tol, p_micro);
    let warmup = ceil_count(math::ln(1.0 / req.tol) / (req.decay_rate * tau)).max(1);
    let (window, replicas) = match (req.regime, req.strong_branch) {
        (Regime::Weak, _) => (1, 1),
        (Regime::Strong, StrongBranch::SingleReplica) => {
            (ceil_count(math::powf(req.tol, -2.0 + p_macro - p_micro)).max(1), 1)
        }
        (Regime::Strong, StrongBranch::SingleWindow) => (1, ceil_count(math::powf(req.tol, p_macro - 2.0)).max(1)),
    };
    HmmParams::new(req.epsilon, macro_dt, req.epsilon * tau, req.t_final, window, replicas, warmup)
}

/// Cost per unit time of a direct scheme reaching `tol`: `ε^{-1} tol^{-1/(1/4-κ)}`
/// (strong) or `ε^{-1} tol^{-1/(1/2-κ)}` (weak).
pub fn direct_cost(req: &ParamRequest) -> Result<f64> {
    req.validate()?;
    let order = match req.regime {
        Regime::Strong => 0.25 - req.kappa,
        Regime::Weak => 0.5 - req.kappa,
    };
    if order <= 0.0 {
        return Err(Error::InvalidParameter { name: "kappa", value: req.kappa });
    }
    Ok(math::powf(req.tol, -1.0 / order) / req.epsilon)
}

/// HMM cost over direct cost; not clamped, so values above 1 mean the
/// direct scheme is cheaper.
pub fn cost_compare(params: &HmmParams, req: &ParamRequest) -> Result<f64> {
    Ok(params.cost_per_unit_time() / direct_cost(req)?)
}
