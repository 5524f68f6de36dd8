//! Scalar abstraction shared by the simulators and solvers.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric kernels operate on.
///
/// Implemented for `f32` and `f64`; the solvers, the flexibility function
/// and the tank model are generic over this trait.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` literal into `Self`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("literal must be representable")
    }

    /// View as `f64`, for reporting and formatting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must be representable as f64")
    }

    /// `self` clamped to `[lo, hi]`.
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        self.max(lo).min(hi)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_to_bounds() {
        assert_eq!(1.5f64.clamp_to(0.0, 1.0), 1.0);
        assert_eq!((-0.5f64).clamp_to(0.0, 1.0), 0.0);
        assert_eq!(0.25f32.clamp_to(0.0, 1.0), 0.25);
    }

    #[test]
    fn literal_roundtrip() {
        assert_eq!(f32::of(0.5).as_f64(), 0.5);
        assert_eq!(f64::of(-3.25), -3.25);
    }
}
