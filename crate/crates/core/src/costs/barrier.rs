//! Smooth penalties that turn `g(w) <= 0` constraints into cost terms.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Convex, non-decreasing, twice-differentiable penalty with `phi(x) -> 0`
/// as `x -> -inf`.
pub trait BarrierFunction<T: Real>: Send + Sync + fmt::Debug {
    fn phi(&self, x: T) -> T;
    fn dphi(&self, x: T) -> T;
    fn d2phi(&self, x: T) -> T;
    /// `sup_x phi''(x)`.
    fn curvature_bound(&self) -> T;
    /// `sup_x phi'(x)`.
    fn slope_bound(&self) -> T;
}

/// `phi(x) = (rho / t) ln(1 + exp(t (x + tau) / rho))`.
///
/// `tau` shifts the kink left so the penalty is already steep at the
/// constraint boundary, `t / rho` sets the sharpness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftplusBarrier<T: Real> {
    pub t: T,
    pub rho: T,
    pub tau: T,
}

impl<T: Real> SoftplusBarrier<T> {
    pub fn new(t: T, rho: T, tau: T) -> Result<Self> {
        if !(t > T::zero()) || !(rho > T::zero()) || !(tau >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "barrier needs t > 0, rho > 0, tau >= 0; got t={t}, rho={rho}, tau={tau}"
            )));
        }
        Ok(Self { t, rho, tau })
    }

    fn arg(&self, x: T) -> T {
        self.t * (x + self.tau) / self.rho
    }
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> BarrierFunction<T> for SoftplusBarrier<T> {
    fn phi(&self, x: T) -> T {
        let z = self.arg(x);
        // log(1 + e^z) = max(z, 0) + log(1 + e^{-|z|})
        let softplus = z.max(T::zero()) + (-z.abs()).exp().ln_1p();
        self.rho / self.t * softplus
    }

    fn dphi(&self, x: T) -> T {
        sigmoid(self.arg(x))
    }

    fn d2phi(&self, x: T) -> T {
        let s = sigmoid(self.arg(x));
        self.t / self.rho * s * (T::one() - s)
    }

    fn curvature_bound(&self) -> T {
        self.t / (T::lit(4.0) * self.rho)
    }

    fn slope_bound(&self) -> T {
        T::one()
    }
}

/// Softplus penalty with the given sharpness parameters.
pub fn default_barrier<T: Real>(t: T, rho: T, tau: T) -> Result<SoftplusBarrier<T>> {
    SoftplusBarrier::new(t, rho, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn standard() -> SoftplusBarrier<f64> {
        SoftplusBarrier::new(10.0, 0.1, 0.1).unwrap()
    }

    #[test]
    fn vanishes_far_left() {
        let b = standard();
        assert!(b.phi(-50.0) < 1e-300);
        assert_eq!(b.dphi(-1e6), 0.0);
        assert!(b.phi(-1e6) >= 0.0);
    }

    #[test]
    fn finite_for_huge_arguments() {
        let b = standard();
        let x = 1e6;
        assert!((b.phi(x) - (x + 0.1)).abs() < 1e-6);
        assert_eq!(b.dphi(x), 1.0);
        assert_eq!(b.d2phi(x), 0.0);
        assert!(b.phi(f64::MAX / 1e3).is_finite());
    }

    #[test]
    fn convex_on_a_grid() {
        let b = standard();
        let h = 1e-3;
        let mut x = -1.0;
        while x < 1.0 {
            let second = b.phi(x + h) - 2.0 * b.phi(x) + b.phi(x - h);
            assert!(second >= -1e-15, "x = {x}: {second}");
            x += 0.01;
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let b = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x: f64 = rng.random_range(-0.5..0.5);
            let h = 1e-6;
            let fd = (b.phi(x + h) - b.phi(x - h)) / (2.0 * h);
            let rel = (fd - b.dphi(x)).abs() / b.dphi(x).abs().max(1e-300);
            assert!(rel < 1e-6, "x={x} fd={fd} d={}", b.dphi(x));
            let fd2 = (b.dphi(x + h) - b.dphi(x - h)) / (2.0 * h);
            assert!((fd2 - b.d2phi(x)).abs() <= 1e-5 * b.d2phi(x).max(1.0));
        }
    }

    #[test]
    fn curvature_bound_is_attained_at_the_kink() {
        let b = standard();
        assert!((b.d2phi(-0.1) - b.curvature_bound()).abs() < 1e-12);
        assert_eq!(b.curvature_bound(), 25.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SoftplusBarrier::<f64>::new(0.0, 0.1, 0.1).is_err());
        assert!(SoftplusBarrier::<f64>::new(1.0, -0.1, 0.1).is_err());
        assert!(SoftplusBarrier::<f64>::new(1.0, 0.1, -0.1).is_err());
    }
}
