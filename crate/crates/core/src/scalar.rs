//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar the pipeline is generic over.
///
/// Implemented for `f32` and `f64`. Geometry, extraction, models and
/// metrics are written against this trait; the harness and the file formats
/// use the `f64` aliases exported at the crate root.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn half() -> Self {
        Self::lit(0.5)
    }

    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Total order over scalars for sorting; NaN sorts last.
pub fn total_cmp<T: Real>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

/// `ceil(x)` that ignores rounding noise just above an integer.
pub fn ceil_tolerant<T: Real>(x: T) -> usize {
    let snapped = x - T::lit(1e-9);
    snapped.ceil().to_usize().unwrap_or(0)
}

/// Round half to even.
pub fn round_half_even<T: Real>(x: T) -> T {
    let floor = x.floor();
    let diff = x - floor;
    let half = T::half();
    let odd = (floor / T::two()).fract() != T::zero();
    if diff > half || (diff == half && odd) {
        floor + T::one()
    } else {
        floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(0.5_f64), 0.0);
        assert_eq!(round_half_even(1.5_f64), 2.0);
        assert_eq!(round_half_even(2.5_f64), 2.0);
        assert_eq!(round_half_even(2.6_f64), 3.0);
        assert_eq!(round_half_even(-0.5_f64), 0.0);
        assert_eq!(round_half_even(3.5_f32), 4.0);
    }

    #[test]
    fn tolerant_ceil() {
        assert_eq!(ceil_tolerant(8.0_f64), 8);
        assert_eq!(ceil_tolerant(8.0 + 1e-12_f64), 8);
        assert_eq!(ceil_tolerant(7.01_f64), 8);
        assert_eq!(ceil_tolerant(20.0_f64 * 0.05), 1);
    }
}
