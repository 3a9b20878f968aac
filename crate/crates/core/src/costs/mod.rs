//! Per-agent cost models: true and stochastic gradients, Hessians and the
//! constants that the mean-square analysis consumes.

mod barrier;
mod finance;
mod quadratic;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::symmetric_eigenvalues;
use crate::scalar::Real;

pub use barrier::{default_barrier, BarrierFunction, SoftplusBarrier};
pub use finance::{FinanceCost, FinanceRole, RoleKind};
pub use quadratic::QuadraticCost;

/// Declared gradient-noise envelope `E‖v‖² ≤ α ‖∇J(w)‖² + σ_v²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseEnvelope<T> {
    pub alpha: T,
    pub sigma_v2: T,
}

impl<T: Real> NoiseEnvelope<T> {
    pub fn zero() -> Self {
        Self {
            alpha: T::zero(),
            sigma_v2: T::zero(),
        }
    }

    /// Componentwise maximum, used to get network-wide constants.
    pub fn max(self, other: Self) -> Self {
        Self {
            alpha: self.alpha.max(other.alpha),
            sigma_v2: self.sigma_v2.max(other.sigma_v2),
        }
    }
}

/// Contract every agent cost satisfies.
///
/// Stochastic gradients are `gradient(w) + gradient_noise(w, rng)`, with the
/// noise zero-mean given `w`.
pub trait CostModel<T: Real>: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, w: &DVector<T>) -> T;
    fn gradient(&self, w: &DVector<T>) -> DVector<T>;
    /// One draw of `v(w)`.
    fn gradient_noise(&self, w: &DVector<T>, rng: &mut dyn RngCore) -> DVector<T>;
    fn hessian(&self, w: &DVector<T>) -> DMatrix<T>;
    /// `(λ_min, λ_max)` valid for every `w`.
    fn hessian_bounds(&self) -> (T, T);
    fn noise_envelope(&self) -> NoiseEnvelope<T>;
    /// `Cov(v(w))`.
    fn noise_covariance(&self, w: &DVector<T>) -> DMatrix<T>;

    fn stochastic_gradient(&self, w: &DVector<T>, rng: &mut dyn RngCore) -> DVector<T> {
        self.gradient(w) + self.gradient_noise(w, rng)
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn as_quadratic(&self) -> Option<&QuadraticCost<T>> {
        None
    }

    fn label(&self) -> String;
}

pub type SharedCost<T> = Arc<dyn CostModel<T>>;

pub(crate) fn standard_normal<T: Real>(rng: &mut dyn RngCore) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}

/// Largest `(α, σ_v²)` over a set of costs.
pub fn network_noise_envelope<T: Real>(costs: &[SharedCost<T>]) -> NoiseEnvelope<T> {
    costs
        .iter()
        .fold(NoiseEnvelope::zero(), |acc, c| acc.max(c.noise_envelope()))
}

/// Central-difference Hessian built from the analytic gradient.
pub fn numeric_hessian<T: Real>(cost: &dyn CostModel<T>, w: &DVector<T>, h: T) -> DMatrix<T> {
    let m = w.len();
    let mut out = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[j] += h;
        wm[j] -= h;
        let col = (cost.gradient(&wp) - cost.gradient(&wm)) / (h + h);
        out.set_column(j, &col);
    }
    (&out + out.transpose()) * T::lit(0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianViolation {
    pub point: usize,
    pub eigenvalue: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianCheckReport {
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub violations: Vec<HessianViolation>,
}

impl HessianCheckReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `λ_min − 1e-9 ≤ eig(∇²J(w)) ≤ λ_max + 1e-9` at every point.
pub fn hessian_check<T: Real>(cost: &dyn CostModel<T>, points: &[DVector<T>]) -> HessianCheckReport {
    let (lo, hi) = cost.hessian_bounds();
    let (lo, hi) = (lo.as_f64(), hi.as_f64());
    let slack = 1e-9;
    let mut report = HessianCheckReport {
        samples: points.len(),
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
        violations: Vec::new(),
    };
    for (i, w) in points.iter().enumerate() {
        for ev in symmetric_eigenvalues(&cost.hessian(w)) {
            let ev = ev.as_f64();
            report.min_eigenvalue = report.min_eigenvalue.min(ev);
            report.max_eigenvalue = report.max_eigenvalue.max(ev);
            if ev < lo - slack || ev > hi + slack {
                report.violations.push(HessianViolation {
                    point: i,
                    eigenvalue: ev,
                    lower: lo,
                    upper: hi,
                });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bounds_are_tight_everywhere() {
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 3.0]);
        let c = QuadraticCost::new(q, DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap();
        let pts: Vec<_> = (0..5).map(|i| DVector::from_element(2, i as f64)).collect();
        let r = hessian_check(&c, &pts);
        assert!(r.ok());
        assert!((r.min_eigenvalue - 2.0).abs() < 1e-12);
        assert!((r.max_eigenvalue - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_only_cost_has_bounds_two_eps() {
        let eps = 0.05;
        let c = QuadraticCost::new(DMatrix::identity(3, 3) * (2.0 * eps), DVector::zeros(3), 0.0).unwrap();
        assert_eq!(c.hessian_bounds(), (0.1, 0.1));
        assert!(hessian_check(&c, &[DVector::zeros(3)]).ok());
    }

    #[test]
    fn check_reports_out_of_envelope_points() {
        #[derive(Debug)]
        struct Liar;
        impl CostModel<f64> for Liar {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, w: &DVector<f64>) -> f64 {
                w[0] * w[0]
            }
            fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
                w * 2.0
            }
            fn gradient_noise(&self, _: &DVector<f64>, _: &mut dyn RngCore) -> DVector<f64> {
                DVector::zeros(1)
            }
            fn hessian(&self, _: &DVector<f64>) -> DMatrix<f64> {
                DMatrix::from_element(1, 1, 2.0)
            }
            fn hessian_bounds(&self) -> (f64, f64) {
                (0.0, 1.0)
            }
            fn noise_envelope(&self) -> NoiseEnvelope<f64> {
                NoiseEnvelope::zero()
            }
            fn noise_covariance(&self, _: &DVector<f64>) -> DMatrix<f64> {
                DMatrix::zeros(1, 1)
            }
            fn label(&self) -> String {
                "liar".into()
            }
        }
        let r = hessian_check(&Liar, &[DVector::zeros(1), DVector::zeros(1)]);
        assert_eq!(r.violations.len(), 2);
        assert_eq!(r.violations[1].point, 1);
    }
}
