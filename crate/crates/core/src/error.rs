use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A spectrum with zero modes was requested.
    EmptySpectrum,
    /// Two objects that must share a truncation level do not.
    DimensionMismatch { expected: usize, found: usize },
    /// A step size or time that must be nonnegative was negative (or NaN).
    NegativeStep(f64),
    /// A parameter outside of its admissible range.
    InvalidParameter { name: &'static str, value: f64 },
    /// `L_g ≥ μ`: the fast equation is not strictly dissipative.
    NotStrictlyDissipative { lipschitz: f64, mu: f64 },
    /// A sampled validation of declared coefficient bounds failed.
    CoefficientCheck(&'static str),
    /// The requested operation is not available for this input.
    Unsupported(&'static str),
    /// An averaging window with no samples.
    EmptyWindow,
    /// Noise indices that would collide or overflow the stream layout.
    KeyOutOfRange,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptySpectrum => write!(f, "spectrum must contain at least one mode"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "mode count mismatch: expected {expected}, found {found}")
            }
            Error::NegativeStep(v) => write!(f, "step must be nonnegative, got {v}"),
            Error::InvalidParameter { name, value } => {
                write!(f, "invalid value {value} for parameter `{name}`")
            }
            Error::NotStrictlyDissipative { lipschitz, mu } => write!(
                f,
                "strict dissipativity violated: L_g = {lipschitz} is not below mu = {mu}"
            ),
            Error::CoefficientCheck(msg) => write!(f, "coefficient check failed: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::EmptyWindow => write!(f, "averaging window contains no samples"),
            Error::KeyOutOfRange => write!(f, "noise key indices out of range"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}
