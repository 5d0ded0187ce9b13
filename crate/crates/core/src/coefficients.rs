//! Nemytskii reaction terms `F(x, y)(ξ) = f(ξ, x(ξ), y(ξ))` and
//! `G(x, y)(ξ) = g(ξ, x(ξ), y(ξ))`, together with the declared bounds the
//! convergence theory relies on and sampled checks of those declarations.

use alloc::sync::Arc;
use alloc::vec;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;
use crate::noise::{fill_uniforms, NoiseStreamKey, Stream};
use crate::spectral::{OperatorSpec, SineBasis, SpectralField};

/// Pointwise reaction function `(ξ, x, y) -> value`.
pub type PointwiseFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CoefficientSpec {
    f: PointwiseFn,
    g: Option<PointwiseFn>,
    potential: Option<PointwiseFn>,
    /// `sup |f|`.
    pub sup_f: f64,
    /// `sup |g|`; `f64::INFINITY` when `g` is unbounded.
    pub sup_g: f64,
    /// `L_g = sup |∂g/∂y|`.
    pub lipschitz_g_y: f64,
    /// `sup |∂f/∂x|`, used to bound the Lipschitz constant of the averaged coefficient.
    pub lipschitz_f_x: f64,
    /// `sup_{ξ, x} |g(ξ, x, 0)|`.
    pub g_at_zero: f64,
    f_depends_on_y: bool,
}

impl fmt::Debug for CoefficientSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSpec")
            .field("sup_f", &self.sup_f)
            .field("sup_g", &self.sup_g)
            .field("lipschitz_g_y", &self.lipschitz_g_y)
            .field("lipschitz_f_x", &self.lipschitz_f_x)
            .field("g_at_zero", &self.g_at_zero)
            .field("g_vanishes", &self.g.is_none())
            .field("f_depends_on_y", &self.f_depends_on_y)
            .finish()
    }
}

impl CoefficientSpec {
    /// Slow reaction `f` with `|f| ≤ sup_f`; the fast reaction starts as `g ≡ 0`.
    pub fn new<F>(f: F, sup_f: f64) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            g: None,
            potential: None,
            sup_f,
            sup_g: 0.0,
            lipschitz_g_y: 0.0,
            lipschitz_f_x: 0.0,
            g_at_zero: 0.0,
            f_depends_on_y: true,
        }
    }

    pub fn with_g<G>(mut self, g: G, sup_g: f64, lipschitz_g_y: f64, g_at_zero: f64) -> Self
    where
        G: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.g = Some(Arc::new(g));
        self.sup_g = sup_g;
        self.lipschitz_g_y = lipschitz_g_y;
        self.g_at_zero = g_at_zero;
        self
    }

    /// Potential `u` with `g = ∂u/∂y`.
    pub fn with_potential<U>(mut self, u: U) -> Self
    where
        U: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.potential = Some(Arc::new(u));
        self
    }

    pub fn with_f_lipschitz(mut self, lipschitz_f_x: f64) -> Self {
        self.lipschitz_f_x = lipschitz_f_x;
        self
    }

    /// Declare that `f` does not depend on `y`.
    pub fn y_independent(mut self) -> Self {
        self.f_depends_on_y = false;
        self
    }

    pub fn f_depends_on_y(&self) -> bool {
        self.f_depends_on_y
    }

    pub fn g_vanishes(&self) -> bool {
        self.g.is_none()
    }

    #[inline]
    pub fn f(&self, xi: f64, x: f64, y: f64) -> f64 {
        (self.f)(xi, x, y)
    }

    #[inline]
    pub fn g(&self, xi: f64, x: f64, y: f64) -> f64 {
        match &self.g {
            Some(g) => g(xi, x, y),
            None => 0.0,
        }
    }

    pub fn potential(&self, xi: f64, x: f64, y: f64) -> Option<f64> {
        self.potential.as_ref().map(|u| u(xi, x, y))
    }

    /// Pointwise `f` on the collocation grid, into `out`.
    pub fn f_on_grid(&self, nodes: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
        for (((o, &xi), &xv), &yv) in out.iter_mut().zip(nodes).zip(x).zip(y) {
            *o = (self.f)(xi, xv, yv);
        }
    }

    /// Pointwise `g` on the collocation grid, into `out`.
    pub fn g_on_grid(&self, nodes: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
        match &self.g {
            Some(g) => {
                for (((o, &xi), &xv), &yv) in out.iter_mut().zip(nodes).zip(x).zip(y) {
                    *o = g(xi, xv, yv);
                }
            }
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }
}

/// `1 / (1 + x²)`: bounded by 1 with `sup |d/dx| = 3√3/8`.
pub fn bump(x: f64) -> f64 {
    1.0 / (1.0 + x * x)
}

const BUMP_LIPSCHITZ: f64 = 0.649_519_052_838_329; // 3√3/8

fn p1_f(xi: f64, x: f64, y: f64) -> f64 {
    math::cos(y) * math::sin(PI * xi) * bump(x)
}

/// P1: `f = cos(y) sin(πξ) / (1 + x²)`, `g ≡ 0`. The fast invariant law is
/// the Gaussian `N(0, (-B)^{-1}/2)`, so `F̄` has a quadrature oracle.
pub fn preset_p1() -> CoefficientSpec {
    CoefficientSpec::new(p1_f, 1.0).with_f_lipschitz(BUMP_LIPSCHITZ)
}

/// P2: `f` as in P1, `g = α sin(y)` with potential `-α cos(y)`; strictly
/// dissipative for `α < π²`.
pub fn preset_p2(alpha: f64) -> CoefficientSpec {
    CoefficientSpec::new(p1_f, 1.0)
        .with_f_lipschitz(BUMP_LIPSCHITZ)
        .with_g(move |_, _, y| alpha * math::sin(y), alpha.abs(), alpha.abs(), 0.0)
        .with_potential(move |_, _, y| -alpha * math::cos(y))
}

/// P3: `f` as in P1, linear `g = -c y`; the fast invariant law is Gaussian
/// with variances `1 / (2(μ_k + c))`.
pub fn preset_p3(c: f64) -> CoefficientSpec {
    CoefficientSpec::new(p1_f, 1.0)
        .with_f_lipschitz(BUMP_LIPSCHITZ)
        .with_g(move |_, _, y| -c * y, f64::INFINITY, c.abs(), 0.0)
        .with_potential(move |_, _, y| -0.5 * c * y * y)
}

pub const DEFAULT_P2_ALPHA: f64 = 2.0;
pub const DEFAULT_P3_DRIFT: f64 = 1.0;

fn eval_pointwise(
    basis: &SineBasis,
    x: &SpectralField,
    y: &SpectralField,
    which: impl Fn(&[f64], &[f64], &[f64], &mut [f64]),
) -> Result<SpectralField> {
    let xg = basis.to_grid(x)?;
    let yg = basis.to_grid(y)?;
    let mut vals = vec![0.0; basis.mode_count()];
    which(basis.nodes(), xg.values(), yg.values(), &mut vals);
    let mut out = vec![0.0; basis.mode_count()];
    basis.analyze(&vals, &mut out);
    Ok(SpectralField::from_coeffs(out))
}

/// `F(x, y)` by collocation: to the grid, pointwise `f`, back to coefficients.
pub fn eval_f(spec: &CoefficientSpec, basis: &SineBasis, x: &SpectralField, y: &SpectralField) -> Result<SpectralField> {
    eval_pointwise(basis, x, y, |n, xv, yv, o| spec.f_on_grid(n, xv, yv, o))
}

/// `G(x, y)` by collocation.
pub fn eval_g(spec: &CoefficientSpec, basis: &SineBasis, x: &SpectralField, y: &SpectralField) -> Result<SpectralField> {
    if spec.g_vanishes() {
        basis.to_grid(x)?;
        basis.to_grid(y)?;
        return Ok(SpectralField::zeros(basis.mode_count()));
    }
    eval_pointwise(basis, x, y, |n, xv, yv, o| spec.g_on_grid(n, xv, yv, o))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrictDissipativity {
    pub holds: bool,
    /// `μ - L_g`.
    pub margin: f64,
}

/// Strict dissipativity: `L_g < μ` with `μ` the smallest eigenvalue of `-B`.
pub fn check_strict_dissipativity(spec: &CoefficientSpec, op_b: &OperatorSpec) -> StrictDissipativity {
    let margin = op_b.smallest() - spec.lipschitz_g_y;
    StrictDissipativity { holds: margin > 0.0, margin }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakCertificateSource {
    /// `G` is bounded.
    BoundedG,
    /// Derived from `L_g < μ` when `G` is unbounded.
    StrictDissipativity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakDissipativity {
    pub holds: bool,
    /// Constants `(c, C)` with `⟨By + G(x, y), y⟩ ≤ -c|y|² + C`.
    pub certificate: Option<(f64, f64)>,
    pub source: Option<WeakCertificateSource>,
}

/// Weak dissipativity. A bounded `G` yields `(c, C) = (μ/2, sup_g²/(2μ))`;
/// an unbounded `G` with `L_g < μ` yields
/// `((μ - L_g)/2, g_at_zero²/(2(μ - L_g)))`.
pub fn check_weak_dissipativity(spec: &CoefficientSpec, op_b: &OperatorSpec) -> WeakDissipativity {
    let mu = op_b.smallest();
    if spec.sup_g.is_finite() {
        return WeakDissipativity {
            holds: true,
            certificate: Some((mu / 2.0, spec.sup_g * spec.sup_g / (2.0 * mu))),
            source: Some(WeakCertificateSource::BoundedG),
        };
    }
    let sd = check_strict_dissipativity(spec, op_b);
    if sd.holds {
        WeakDissipativity {
            holds: true,
            certificate: Some((sd.margin / 2.0, spec.g_at_zero * spec.g_at_zero / (2.0 * sd.margin))),
            source: Some(WeakCertificateSource::StrictDissipativity),
        }
    } else {
        WeakDissipativity { holds: false, certificate: None, source: None }
    }
}

/// Spot-check the declared bounds on `samples` random points of
/// `[0, 1] × [-radius, radius]²`: `|f| ≤ sup_f`, `|g| ≤ sup_g`,
/// `|∂g/∂y| ≤ L_g` and, when a potential is given, `∂u/∂y = g` to `1e-6`.
pub fn validate_sampled(spec: &CoefficientSpec, radius: f64, samples: usize, seed: u64) -> Result<()> {
    const H: f64 = 1e-4;
    let mut u = [0.0; 3];
    for s in 0..samples {
        fill_uniforms(&NoiseStreamKey::sequential(seed, Stream::Validation, 1, s as u64), &mut u);
        let xi = u[0];
        let x = radius * (2.0 * u[1] - 1.0);
        let y = radius * (2.0 * u[2] - 1.0);
        if spec.f(xi, x, y).abs() > spec.sup_f * (1.0 + 1e-12) {
            return Err(Error::CoefficientCheck("|f| exceeds declared sup_f"));
        }
        let g = spec.g(xi, x, y);
        if g.abs() > spec.sup_g * (1.0 + 1e-12) {
            return Err(Error::CoefficientCheck("|g| exceeds declared sup_g"));
        }
        let dg = (spec.g(xi, x, y + H) - spec.g(xi, x, y - H)) / (2.0 * H);
        if dg.abs() > spec.lipschitz_g_y * (1.0 + 1e-6) + 1e-6 {
            return Err(Error::CoefficientCheck("|dg/dy| exceeds declared L_g"));
        }
        if let Some(up) = spec.potential(xi, x, y + H) {
            let um = spec.potential(xi, x, y - H).unwrap_or(0.0);
            if ((up - um) / (2.0 * H) - g).abs() > 1e-6 {
                return Err(Error::CoefficientCheck("du/dy does not match g"));
            }
        }
    }
    Ok(())
}
