use crate::coefficients::CoefficientSpec;
use crate::error::Result;
use crate::spectral::{OperatorSpec, SineBasis};

/// A truncated slow-fast system: linear parts `A`, `B`, reaction terms and
/// the collocation basis shared by every solver.
#[derive(Debug, Clone)]
pub struct SlowFastSystem {
    pub coefficients: CoefficientSpec,
    pub op_a: OperatorSpec,
    pub op_b: OperatorSpec,
    pub basis: SineBasis,
}

impl SlowFastSystem {
    /// `A = B = ∂²/∂ξ²` with Dirichlet conditions, truncated to `modes` modes.
    pub fn laplacian(coefficients: CoefficientSpec, modes: usize) -> Result<Self> {
        Ok(Self {
            coefficients,
            op_a: OperatorSpec::laplacian(modes)?,
            op_b: OperatorSpec::laplacian(modes)?,
            basis: SineBasis::new(modes)?,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.basis.mode_count()
    }
}
