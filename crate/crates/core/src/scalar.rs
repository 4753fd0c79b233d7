//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real floating point scalar: `f32` or `f64`.
///
/// Tolerances in this crate are written for `f64`; [`Real::tol`] widens them
/// for lower precision types by the square root of the epsilon ratio.
pub trait Real: RealField + Copy + ToPrimitive + Default {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// An `f64` tolerance adapted to this type's precision.
    fn tol(x: f64) -> Self {
        let ratio = (Self::default_epsilon().as_f64() / f64::EPSILON).sqrt();
        Self::lit(x * ratio.max(1.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
