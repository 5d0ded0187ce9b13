//! Named test problems and their averaged-coefficient oracles.

use std::fmt;
use std::str::FromStr;

use hmm_core::averaging::{GaussianCoefficient, InvariantMeasureSpec};
use hmm_core::coefficients::{preset_p1, preset_p2, preset_p3, CoefficientSpec, DEFAULT_P2_ALPHA, DEFAULT_P3_DRIFT};
use hmm_core::quadrature::DEFAULT_ORDER;
use hmm_core::spectral::OperatorSpec;
use hmm_core::SlowFastSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    /// `G ≡ 0`, Gaussian fast law.
    P1,
    /// Nonlinear bounded `G = α sin(y)`.
    P2,
    /// Linear `G = -c y`.
    P3,
}

impl Problem {
    pub fn spec(self) -> CoefficientSpec {
        match self {
            Problem::P1 => preset_p1(),
            Problem::P2 => preset_p2(DEFAULT_P2_ALPHA),
            Problem::P3 => preset_p3(DEFAULT_P3_DRIFT),
        }
    }

    pub fn system(self, modes: usize) -> hmm_core::Result<SlowFastSystem> {
        SlowFastSystem::laplacian(self.spec(), modes)
    }

    /// Coefficient `c` of a linear fast drift `-c y`; `None` when `G` is
    /// nonlinear.
    pub fn linear_drift(self) -> Option<f64> {
        match self {
            Problem::P1 => Some(0.0),
            Problem::P2 => None,
            Problem::P3 => Some(DEFAULT_P3_DRIFT),
        }
    }

    /// Exact invariant law of the continuous fast equation, when Gaussian.
    pub fn invariant_measure(self, op_b: &OperatorSpec) -> Option<InvariantMeasureSpec> {
        let c = self.linear_drift()?;
        if c == 0.0 {
            Some(InvariantMeasureSpec::nu(op_b))
        } else {
            InvariantMeasureSpec::linear_drift(op_b, c).ok()
        }
    }

    /// Exact invariant law of the microsolver at step `τ`, when Gaussian.
    pub fn scheme_measure(self, op_b: &OperatorSpec, tau: f64) -> Option<InvariantMeasureSpec> {
        InvariantMeasureSpec::scheme_stationary(op_b, tau, self.linear_drift()?).ok()
    }

    /// Quadrature oracle for `F̄` under the continuous invariant law.
    pub fn oracle(self, sys: &SlowFastSystem) -> Option<GaussianCoefficient<'_>> {
        let measure = self.invariant_measure(&sys.op_b)?;
        GaussianCoefficient::new(sys, &measure, DEFAULT_ORDER).ok()
    }

    /// Quadrature oracle for the mean of the `τ`-microsolver's window average.
    pub fn scheme_oracle(self, sys: &SlowFastSystem, tau: f64) -> Option<GaussianCoefficient<'_>> {
        let measure = self.scheme_measure(&sys.op_b, tau)?;
        GaussianCoefficient::new(sys, &measure, DEFAULT_ORDER).ok()
    }
}

impl FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(Problem::P1),
            "p2" => Ok(Problem::P2),
            "p3" => Ok(Problem::P3),
            other => Err(format!("unknown problem `{other}` (expected p1, p2 or p3)")),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::P1 => "p1",
            Problem::P2 => "p2",
            Problem::P3 => "p3",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hmm_core::averaging::AveragedCoefficient;
    use hmm_core::spectral::SpectralField;

    #[test]
    fn parse_round_trip() {
        for p in [Problem::P1, Problem::P2, Problem::P3] {
            assert_eq!(p.to_string().parse::<Problem>().unwrap(), p);
        }
        assert!("P4".parse::<Problem>().is_err());
    }

    #[test]
    fn oracles_exist_for_gaussian_problems() {
        for p in [Problem::P1, Problem::P3] {
            let sys = p.system(7).unwrap();
            let fbar = p.oracle(&sys).unwrap().fbar(&SpectralField::basis(7, 1)).unwrap();
            assert!(fbar.norm() > 0.0 && fbar.norm() <= 1.0);
            assert!(p.scheme_oracle(&sys, 0.01).is_some());
        }
        let sys = Problem::P2.system(7).unwrap();
        assert!(Problem::P2.oracle(&sys).is_none());
    }
}
