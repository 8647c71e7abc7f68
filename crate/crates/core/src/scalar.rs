use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, NumCast};

/// Real scalar the model and observers are written against.
///
/// Blanket-implemented for every float-like type, so `f32`, `f64` and
/// extended-precision types such as double-double all qualify.
pub trait Scalar: Float + FloatConst + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal. Panics only if the type cannot represent
    /// finite `f64` values at all.
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("scalar type cannot represent an f64 literal")
    }

    /// Relative precision used by convergence and rank tests: `epsilon()`
    /// floored at double-double precision, because some extended types
    /// report the smallest positive value as their epsilon.
    fn precision() -> Self {
        Self::epsilon().max(Self::of(f64::EPSILON * f64::EPSILON / 4.0))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `sgn` with `sgn(0) = 0`.
    fn signum0(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }
}

impl<T> Scalar for T where T: Float + FloatConst + Debug + Display + Send + Sync + 'static {}
