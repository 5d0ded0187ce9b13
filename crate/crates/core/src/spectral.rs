//! Fields in the Dirichlet sine eigenbasis and the diagonal linear operators
//! acting on them.
//!
//! Mode `k` (1-based) is the eigenfunction `e_k(ξ) = √2 sin(kπξ)`; index `k - 1`
//! of every coefficient vector holds its coefficient.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use core::ops::{Add, Index, Mul, Sub};

use crate::error::{Error, Result};
use crate::math;

/// Eigenvalues of a negative-definite diagonal operator: `-A e_k = λ_k e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    eigenvalues: Vec<f64>,
}

impl OperatorSpec {
    /// Dirichlet Laplacian on `(0, 1)` truncated to `k` modes: `λ_k = π² k²`.
    pub fn laplacian(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::EmptySpectrum);
        }
        let eigenvalues = (1..=modes).map(|k| PI * PI * (k * k) as f64).collect();
        Ok(Self { eigenvalues })
    }

    /// Arbitrary strictly increasing positive spectrum.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        let mut prev = 0.0;
        for &ev in &eigenvalues {
            if !(ev > prev) || !ev.is_finite() {
                return Err(Error::InvalidParameter { name: "eigenvalue", value: ev });
            }
            prev = ev;
        }
        Ok(Self { eigenvalues })
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue (λ or μ).
    pub fn smallest(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Per-mode multipliers `1 / (1 + step λ_k)` of the resolvent `(I - step A)^{-1}`.
    pub fn resolvent_factors(&self, step: f64) -> Result<Vec<f64>> {
        check_step(step)?;
        Ok(self.eigenvalues.iter().map(|&ev| 1.0 / (1.0 + step * ev)).collect())
    }

    fn check_dim(&self, field: &SpectralField) -> Result<()> {
        if field.mode_count() != self.mode_count() {
            return Err(Error::DimensionMismatch {
                expected: self.mode_count(),
                found: field.mode_count(),
            });
        }
        Ok(())
    }
}

fn check_step(step: f64) -> Result<()> {
    if step >= 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeStep(step))
    }
}

/// A function in `H = L²(0, 1)` given by its first `K` sine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(modes: usize) -> Self {
        Self { coeffs: vec![0.0; modes] }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// The basis vector `e_k`, with `k` counted from 1.
    pub fn basis(modes: usize, k: usize) -> Self {
        assert!(k >= 1 && k <= modes, "mode {k} outside 1..={modes}");
        let mut field = Self::zeros(modes);
        field.coeffs[k - 1] = 1.0;
        field
    }

    pub fn mode_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of mode `k` (1-based).
    pub fn mode(&self, k: usize) -> f64 {
        self.coeffs[k - 1]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    /// H-norm, by Parseval the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_squared())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        debug_assert_eq!(self.mode_count(), other.mode_count());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let sq: f64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b) * (a - b)).sum();
        math::sqrt(sq)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for SpectralField {
    type Output = f64;

    fn index(&self, idx: usize) -> &f64 {
        &self.coeffs[idx]
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;

    fn add(self, rhs: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.mode_count(), rhs.mode_count());
        SpectralField { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.mode_count(), rhs.mode_count());
        SpectralField { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect() }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

/// Point values at the collocation nodes `ξ_i = i / (K + 1)`, `i = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(I - step A)^{-1}` applied mode by mode.
pub fn apply_resolvent(field: &SpectralField, step: f64, op: &OperatorSpec) -> Result<SpectralField> {
    check_step(step)?;
    op.check_dim(field)?;
    let coeffs = field
        .coeffs
        .iter()
        .zip(op.eigenvalues())
        .map(|(c, ev)| c / (1.0 + step * ev))
        .collect();
    Ok(SpectralField { coeffs })
}

/// `exp(t A)` applied mode by mode.
pub fn apply_semigroup(field: &SpectralField, t: f64, op: &OperatorSpec) -> Result<SpectralField> {
    check_step(t)?;
    op.check_dim(field)?;
    let coeffs = field
        .coeffs
        .iter()
        .zip(op.eigenvalues())
        .map(|(c, ev)| c * math::exp(-ev * t))
        .collect();
    Ok(SpectralField { coeffs })
}

/// `|(-A)^a x| = (Σ λ_k^{2a} x_k²)^{1/2}` for `a ∈ [-1, 1]`.
pub fn fractional_norm(field: &SpectralField, a: f64, op: &OperatorSpec) -> Result<f64> {
    if !(-1.0..=1.0).contains(&a) {
        return Err(Error::InvalidParameter { name: "a", value: a });
    }
    op.check_dim(field)?;
    let sq: f64 = field
        .coeffs
        .iter()
        .zip(op.eigenvalues())
        .map(|(c, ev)| math::powf(*ev, 2.0 * a) * c * c)
        .sum();
    Ok(math::sqrt(sq))
}

/// Discrete sine transform between coefficients and collocation values.
///
/// On the grid `ξ_i = i / (K + 1)` the sampled basis vectors are orthogonal,
/// `Σ_i e_k(ξ_i) e_l(ξ_i) = (K + 1) δ_kl`, so the pair below is an exact
/// inverse and `|c|² = (1 / (K + 1)) Σ_i g_i²`.
#[derive(Debug, Clone)]
pub struct SineBasis {
    modes: usize,
    // Symmetric: entry (i, k) = √2 sin(π i k / (K + 1)).
    table: Vec<f64>,
    nodes: Vec<f64>,
}

impl SineBasis {
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::EmptySpectrum);
        }
        let period = 2 * (modes + 1);
        let denom = (modes + 1) as f64;
        let mut table = vec![0.0; modes * modes];
        for i in 1..=modes {
            for k in 1..=modes {
                // Reduce the integer argument first so large K keeps full accuracy.
                let r = (i * k) % period;
                table[(i - 1) * modes + (k - 1)] = SQRT_2 * math::sin(PI * r as f64 / denom);
            }
        }
        let nodes = (1..=modes).map(|i| i as f64 / denom).collect();
        Ok(Self { modes, table, nodes })
    }

    pub fn mode_count(&self) -> usize {
        self.modes
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weight `1 / (K + 1)` of each node.
    pub fn weight(&self) -> f64 {
        1.0 / (self.modes + 1) as f64
    }

    /// Value of basis function `k` (1-based) at node `i` (1-based).
    pub fn basis_value(&self, i: usize, k: usize) -> f64 {
        self.table[(i - 1) * self.modes + (k - 1)]
    }

    pub fn to_grid(&self, field: &SpectralField) -> Result<GridField> {
        self.check(field.mode_count())?;
        let mut values = vec![0.0; self.modes];
        self.synthesize(field.coeffs(), &mut values);
        Ok(GridField { values })
    }

    pub fn to_spectral(&self, grid: &GridField) -> Result<SpectralField> {
        self.check(grid.len())?;
        let mut coeffs = vec![0.0; self.modes];
        self.analyze(grid.values(), &mut coeffs);
        Ok(SpectralField { coeffs })
    }

    /// Coefficients to grid values, into a caller-provided buffer.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.modes);
        debug_assert_eq!(out.len(), self.modes);
        for (row, o) in self.table.chunks_exact(self.modes).zip(out.iter_mut()) {
            *o = row.iter().zip(coeffs).map(|(m, c)| m * c).sum();
        }
    }

    /// Grid values to coefficients, into a caller-provided buffer.
    pub fn analyze(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.modes);
        debug_assert_eq!(out.len(), self.modes);
        let w = self.weight();
        for (row, o) in self.table.chunks_exact(self.modes).zip(out.iter_mut()) {
            *o = w * row.iter().zip(values).map(|(m, g)| m * g).sum::<f64>();
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, found: len });
        }
        Ok(())
    }
}
