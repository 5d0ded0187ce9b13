//! Test functionals `Φ` for weak errors.

use hmm_core::spectral::SpectralField;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunctional {
    /// `cos(⟨x, h⟩)`.
    CosInner(SpectralField),
    /// `exp(-|x|²)`.
    ExpNegNorm2,
    /// `⟨x, e_k⟩` (1-based `k`); linear, so not bounded.
    ModeProjection(usize),
}

impl TestFunctional {
    pub fn eval(&self, x: &SpectralField) -> f64 {
        match self {
            TestFunctional::CosInner(h) => x.dot(h).cos(),
            TestFunctional::ExpNegNorm2 => (-x.norm_squared()).exp(),
            TestFunctional::ModeProjection(k) => x.mode(*k),
        }
    }

    /// Bounded with bounded first and second derivatives.
    pub fn is_bounded_c2(&self) -> bool {
        !matches!(self, TestFunctional::ModeProjection(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let x = SpectralField::from_coeffs(vec![0.5, -1.0]);
        let phi = TestFunctional::CosInner(SpectralField::basis(2, 2));
        assert!((phi.eval(&x) - 1f64.cos()).abs() < 1e-15);
        assert!((TestFunctional::ExpNegNorm2.eval(&x) - (-1.25f64).exp()).abs() < 1e-15);
        assert_eq!(TestFunctional::ModeProjection(1).eval(&x), 0.5);
        assert!(!TestFunctional::ModeProjection(1).is_bounded_c2());
    }
}
