//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All math is written against [`Real`], which is satisfied by `f32` and
//! `f64`: [`nalgebra::RealField`] for the linear algebra plus the `num-traits`
//! primitive conversions for literals and reporting.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// A real floating-point scalar usable throughout the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Widens to `f64` for reporting and statistics.
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("finite widening")
    }

    /// Converts a count or index.
    fn of_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }

    /// Machine epsilon of the underlying format.
    fn machine_epsilon() -> Self;
}

impl Real for f64 {
    fn machine_epsilon() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn machine_epsilon() -> Self {
        f32::EPSILON
    }
}

/// `max(floor, 100 * eps)`: a tolerance that stays meaningful in single precision.
pub(crate) fn tolerance<T: Real>(floor: f64) -> T {
    let eps = T::machine_epsilon() * T::lit(100.0);
    T::lit(floor).max(eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.25).as_f64(), 0.25);
        assert_eq!(<f32 as Real>::lit(0.25).as_f64(), 0.25);
        assert_eq!(<f64 as Real>::of_usize(7), 7.0);
    }

    #[test]
    fn tolerance_respects_precision() {
        assert_eq!(tolerance::<f64>(1e-12), 1e-12);
        assert!(tolerance::<f32>(1e-12) > 1e-6);
    }
}
