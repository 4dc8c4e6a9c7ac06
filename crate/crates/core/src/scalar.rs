//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the kernels, agents and theory routines are generic over.
///
/// `f32` and `f64` implement it. `RealField` supplies the linear algebra,
/// num-traits supplies lossless-enough conversions to and from `f64` for
/// random sampling and reporting.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the type cannot represent it at all.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable as scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn magnitude(self) -> Self {
        nalgebra::ComplexField::abs(self)
    }

    #[inline]
    fn root(self) -> Self {
        nalgebra::ComplexField::sqrt(self)
    }

    #[inline]
    fn finite(self) -> bool {
        nalgebra::ComplexField::is_finite(&self)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::from_count(7), 7.0);
        assert_eq!((-2.0f64).magnitude(), 2.0);
        assert_eq!(4.0f32.root(), 2.0);
        assert!(!f64::NAN.finite());
        assert_eq!(0.25f32.as_f64(), 0.25);
    }
}
