use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{standard_normal, CostModel, NoiseEnvelope};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::scalar::Real;

/// `J(w) = ½ wᵀ q w − bᵀ w` with Gaussian gradient noise
/// `v = noise_std · z₁ + relative_std · (∇J(w) ⊙ z₂)`.
///
/// The additive part gives `σ_v² = M · noise_std²`; the relative part gives
/// `α = relative_std²`, since `E‖∇J ⊙ z‖² = ‖∇J‖²`.
#[derive(Clone, Debug)]
pub struct QuadraticCost<T: Real> {
    q: DMatrix<T>,
    b: DVector<T>,
    noise_std: T,
    relative_std: T,
    bounds: (T, T),
}

impl<T: Real> QuadraticCost<T> {
    pub fn new(q: DMatrix<T>, b: DVector<T>, noise_std: T) -> Result<Self> {
        Self::with_relative_noise(q, b, noise_std, T::zero())
    }

    pub fn with_relative_noise(q: DMatrix<T>, b: DVector<T>, noise_std: T, relative_std: T) -> Result<Self> {
        let m = q.nrows();
        if m == 0 || q.ncols() != m || b.len() != m {
            return Err(Error::Dimension(format!(
                "quadratic cost: q is {}x{}, b has length {}",
                q.nrows(),
                q.ncols(),
                b.len()
            )));
        }
        let asym = (&q - q.transpose()).amax();
        if asym > T::lit(1e-12) * q.amax().max(T::one()) {
            return Err(Error::InvalidParameter("quadratic cost: q is not symmetric".into()));
        }
        if noise_std < T::zero() || relative_std < T::zero() {
            return Err(Error::InvalidParameter("noise standard deviations must be non-negative".into()));
        }
        let ev = symmetric_eigenvalues(&q);
        let lo = ev[0];
        let hi = ev[m - 1];
        if lo < -T::lit(1e-12) * hi.abs().max(T::one()) {
            return Err(Error::InvalidParameter(format!("quadratic cost: q is indefinite (λ_min = {lo})")));
        }
        Ok(Self {
            q,
            b,
            noise_std,
            relative_std,
            bounds: (lo.max(T::zero()), hi),
        })
    }

    /// `½ s ‖w − center‖²` up to a constant.
    pub fn isotropic(center: DVector<T>, s: T, noise_std: T) -> Result<Self> {
        let m = center.len();
        Self::new(DMatrix::identity(m, m) * s, center * s, noise_std)
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn b(&self) -> &DVector<T> {
        &self.b
    }

    pub fn noise_std(&self) -> T {
        self.noise_std
    }

    pub fn relative_std(&self) -> T {
        self.relative_std
    }
}

impl<T: Real> CostModel<T> for QuadraticCost<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, w: &DVector<T>) -> T {
        (w.transpose() * &self.q * w)[(0, 0)] * T::lit(0.5) - self.b.dot(w)
    }

    fn gradient(&self, w: &DVector<T>) -> DVector<T> {
        &self.q * w - &self.b
    }

    fn gradient_noise(&self, w: &DVector<T>, rng: &mut dyn RngCore) -> DVector<T> {
        let m = self.dim();
        let mut v = DVector::zeros(m);
        if self.noise_std > T::zero() {
            for i in 0..m {
                v[i] += self.noise_std * standard_normal::<T>(rng);
            }
        }
        if self.relative_std > T::zero() {
            let g = self.gradient(w);
            for i in 0..m {
                v[i] += self.relative_std * g[i] * standard_normal::<T>(rng);
            }
        }
        v
    }

    fn hessian(&self, _w: &DVector<T>) -> DMatrix<T> {
        self.q.clone()
    }

    fn hessian_bounds(&self) -> (T, T) {
        self.bounds
    }

    fn noise_envelope(&self) -> NoiseEnvelope<T> {
        NoiseEnvelope {
            alpha: self.relative_std * self.relative_std,
            sigma_v2: T::of_usize(self.dim()) * self.noise_std * self.noise_std,
        }
    }

    fn noise_covariance(&self, w: &DVector<T>) -> DMatrix<T> {
        let m = self.dim();
        let mut cov = DMatrix::identity(m, m) * (self.noise_std * self.noise_std);
        if self.relative_std > T::zero() {
            let g = self.gradient(w);
            let r2 = self.relative_std * self.relative_std;
            for i in 0..m {
                cov[(i, i)] += r2 * g[i] * g[i];
            }
        }
        cov
    }

    fn is_deterministic(&self) -> bool {
        self.noise_std == T::zero() && self.relative_std == T::zero()
    }

    fn as_quadratic(&self) -> Option<&QuadraticCost<T>> {
        Some(self)
    }

    fn label(&self) -> String {
        "quadratic".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_the_eigenvalues_of_q() {
        let q = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let c = QuadraticCost::new(q, DVector::zeros(2), 0.0).unwrap();
        let (lo, hi) = c.hessian_bounds();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_minimizer_is_the_center() {
        let center = DVector::from_vec(vec![1.0, -2.0]);
        let c = QuadraticCost::isotropic(center.clone(), 3.0, 0.0).unwrap();
        assert!(c.gradient(&center).amax() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_or_indefinite() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(QuadraticCost::new(bad, DVector::zeros(2), 0.0).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(QuadraticCost::new(indef, DVector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn envelope_constants() {
        let c = QuadraticCost::<f64>::with_relative_noise(DMatrix::identity(3, 3), DVector::zeros(3), 0.5, 0.2).unwrap();
        let e = c.noise_envelope();
        assert!((e.alpha - 0.04).abs() < 1e-15);
        assert!((e.sigma_v2 - 0.75).abs() < 1e-15);
    }
}
