//! Collaborative portfolio costs.
//!
//! Four kinds of agents share a decision vector `w ∈ R^M` of asset holdings:
//! return seekers (`U`), risk minimizers (`S`), a tax-bracket constraint
//! (`H`) and a budget constraint (`K`). Inequality constraints, including
//! `w ⪰ 0` which every agent carries, enter through a smooth barrier.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::RngCore;

use super::{standard_normal, BarrierFunction, CostModel, NoiseEnvelope};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum RoleKind {
    U,
    S,
    H,
    K,
}

impl RoleKind {
    pub fn name(self) -> &'static str {
        match self {
            RoleKind::U => "U",
            RoleKind::S => "S",
            RoleKind::H => "H",
            RoleKind::K => "K",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FinanceRole<T: Real> {
    /// `−p̄ᵀw`; sampled returns are `u ~ N(p̄, I)`.
    ExpectedReturn { p_bar: DVector<T> },
    /// `wᵀ R_p w`; centered returns are `s ~ N(0, R_p)`.
    Variance { r_p: DMatrix<T> },
    /// `φ(b − hᵀw)`.
    Tax { h: DVector<T>, b: T },
    /// `φ(𝟙ᵀw − b₀)`.
    Budget { b0: T },
}

impl<T: Real> FinanceRole<T> {
    pub fn kind(&self) -> RoleKind {
        match self {
            FinanceRole::ExpectedReturn { .. } => RoleKind::U,
            FinanceRole::Variance { .. } => RoleKind::S,
            FinanceRole::Tax { .. } => RoleKind::H,
            FinanceRole::Budget { .. } => RoleKind::K,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FinanceCost<T: Real> {
    role: FinanceRole<T>,
    m: usize,
    barrier: Arc<dyn BarrierFunction<T>>,
    ridge: T,
    nonnegativity: bool,
    // square root of R_p for sampling, and its extreme eigenvalues
    r_sqrt: Option<DMatrix<T>>,
    r_eig: (T, T),
    r_trace: T,
}

impl<T: Real> FinanceCost<T> {
    pub fn new(role: FinanceRole<T>, m: usize, barrier: Arc<dyn BarrierFunction<T>>, ridge: T) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("decision dimension must be positive".into()));
        }
        if ridge < T::zero() {
            return Err(Error::InvalidParameter(format!("ridge must be non-negative, got {ridge}")));
        }
        let mut r_sqrt = None;
        let mut r_eig = (T::zero(), T::zero());
        let mut r_trace = T::zero();
        match &role {
            FinanceRole::ExpectedReturn { p_bar } if p_bar.len() != m => {
                return Err(Error::Dimension(format!("p_bar has length {}, expected {m}", p_bar.len())));
            }
            FinanceRole::Tax { h, .. } if h.len() != m => {
                return Err(Error::Dimension(format!("h has length {}, expected {m}", h.len())));
            }
            FinanceRole::Variance { r_p } => {
                if r_p.nrows() != m || r_p.ncols() != m {
                    return Err(Error::Dimension(format!("R_p is {}x{}, expected {m}x{m}", r_p.nrows(), r_p.ncols())));
                }
                if (r_p - r_p.transpose()).amax() > T::lit(1e-12) * r_p.amax().max(T::one()) {
                    return Err(Error::InvalidParameter("R_p is not symmetric".into()));
                }
                let eig = SymmetricEigen::new(r_p.clone());
                if eig.eigenvalues.iter().any(|&l| l < -T::lit(1e-12)) {
                    return Err(Error::InvalidParameter("R_p is not positive semidefinite".into()));
                }
                let sq = eig.eigenvalues.map(|l| l.max(T::zero()).sqrt());
                r_sqrt = Some(&eig.eigenvectors * DMatrix::from_diagonal(&sq));
                let ev = symmetric_eigenvalues(r_p);
                r_eig = (ev[0].max(T::zero()), ev[m - 1]);
                r_trace = r_p.trace();
                if !(r_eig.0 + ridge > T::zero()) {
                    return Err(Error::InvalidParameter(
                        "variance role needs a positive definite R_p or a positive ridge".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(Self {
            role,
            m,
            barrier,
            ridge,
            nonnegativity: true,
            r_sqrt,
            r_eig,
            r_trace,
        })
    }

    /// Drops the `w ⪰ 0` penalty.
    pub fn without_nonnegativity(mut self) -> Self {
        self.nonnegativity = false;
        self
    }

    pub fn role(&self) -> &FinanceRole<T> {
        &self.role
    }

    pub fn kind(&self) -> RoleKind {
        self.role.kind()
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    fn wrong_role(&self, want: &str) -> Error {
        Error::InvalidParameter(format!("{want} called on a {}-role cost", self.kind().name()))
    }

    /// Stochastic gradient of a return-seeking agent.
    pub fn expected_return_gradient(&self, w: &DVector<T>, rng: &mut dyn RngCore) -> Result<DVector<T>> {
        match self.role {
            FinanceRole::ExpectedReturn { .. } => Ok(self.stochastic_gradient(w, rng)),
            _ => Err(self.wrong_role("expected_return_gradient")),
        }
    }

    /// Stochastic gradient of a risk-minimizing agent.
    pub fn variance_cost_gradient(&self, w: &DVector<T>, rng: &mut dyn RngCore) -> Result<DVector<T>> {
        match self.role {
            FinanceRole::Variance { .. } => Ok(self.stochastic_gradient(w, rng)),
            _ => Err(self.wrong_role("variance_cost_gradient")),
        }
    }

    /// Exact gradient of a constraint agent; these carry no gradient noise.
    pub fn constraint_cost_gradient(&self, w: &DVector<T>) -> Result<DVector<T>> {
        match self.role {
            FinanceRole::Tax { .. } | FinanceRole::Budget { .. } => Ok(self.gradient(w)),
            _ => Err(self.wrong_role("constraint_cost_gradient")),
        }
    }

    fn nonneg_curvature(&self) -> T {
        if self.nonnegativity {
            self.barrier.curvature_bound()
        } else {
            T::zero()
        }
    }
}

impl<T: Real> CostModel<T> for FinanceCost<T> {
    fn dim(&self) -> usize {
        self.m
    }

    fn value(&self, w: &DVector<T>) -> T {
        let mut v = self.ridge * w.norm_squared();
        if self.nonnegativity {
            for &x in w.iter() {
                v += self.barrier.phi(-x);
            }
        }
        v + match &self.role {
            FinanceRole::ExpectedReturn { p_bar } => -p_bar.dot(w),
            FinanceRole::Variance { r_p } => (w.transpose() * r_p * w)[(0, 0)],
            FinanceRole::Tax { h, b } => self.barrier.phi(*b - h.dot(w)),
            FinanceRole::Budget { b0 } => self.barrier.phi(w.sum() - *b0),
        }
    }

    fn gradient(&self, w: &DVector<T>) -> DVector<T> {
        let mut g = w * (self.ridge + self.ridge);
        if self.nonnegativity {
            for (gi, &x) in g.iter_mut().zip(w.iter()) {
                *gi -= self.barrier.dphi(-x);
            }
        }
        match &self.role {
            FinanceRole::ExpectedReturn { p_bar } => g -= p_bar,
            FinanceRole::Variance { r_p } => g += r_p * w * T::lit(2.0),
            FinanceRole::Tax { h, b } => g -= h * self.barrier.dphi(*b - h.dot(w)),
            FinanceRole::Budget { b0 } => g.add_scalar_mut(self.barrier.dphi(w.sum() - *b0)),
        }
        g
    }

    fn gradient_noise(&self, w: &DVector<T>, rng: &mut dyn RngCore) -> DVector<T> {
        match &self.role {
            // −u + p̄ with u ~ N(p̄, I)
            FinanceRole::ExpectedReturn { .. } => DVector::from_fn(self.m, |_, _| -standard_normal::<T>(rng)),
            // 2 s sᵀ w − 2 R_p w with s = R_p^{1/2} z
            FinanceRole::Variance { r_p } => {
                let z = DVector::from_fn(self.m, |_, _| standard_normal::<T>(rng));
                let s = self.r_sqrt.as_ref().expect("variance role keeps R_p^{1/2}") * z;
                (&s * s.dot(w) - r_p * w) * T::lit(2.0)
            }
            FinanceRole::Tax { .. } | FinanceRole::Budget { .. } => DVector::zeros(self.m),
        }
    }

    fn stochastic_gradient(&self, w: &DVector<T>, rng: &mut dyn RngCore) -> DVector<T> {
        if self.is_deterministic() {
            self.gradient(w)
        } else {
            self.gradient(w) + self.gradient_noise(w, rng)
        }
    }

    fn hessian(&self, w: &DVector<T>) -> DMatrix<T> {
        let m = self.m;
        let mut h = DMatrix::identity(m, m) * (self.ridge + self.ridge);
        if self.nonnegativity {
            for i in 0..m {
                h[(i, i)] += self.barrier.d2phi(-w[i]);
            }
        }
        match &self.role {
            FinanceRole::ExpectedReturn { .. } => {}
            FinanceRole::Variance { r_p } => h += r_p * T::lit(2.0),
            FinanceRole::Tax { h: hv, b } => {
                let c = self.barrier.d2phi(*b - hv.dot(w));
                h += hv * hv.transpose() * c;
            }
            FinanceRole::Budget { b0 } => {
                let c = self.barrier.d2phi(w.sum() - *b0);
                h.add_scalar_mut(c);
            }
        }
        h
    }

    fn hessian_bounds(&self) -> (T, T) {
        let two = T::lit(2.0);
        let ridge = two * self.ridge;
        let kappa = self.barrier.curvature_bound();
        let nn = self.nonneg_curvature();
        match &self.role {
            FinanceRole::ExpectedReturn { .. } => (ridge, ridge + nn),
            FinanceRole::Variance { .. } => (two * self.r_eig.0 + ridge, two * self.r_eig.1 + ridge + nn),
            FinanceRole::Tax { h, .. } => (ridge, ridge + nn + kappa * h.norm_squared()),
            FinanceRole::Budget { .. } => (ridge, ridge + nn + kappa * T::of_usize(self.m)),
        }
    }

    /// `U`: `(0, M)`. `H`, `K`: `(0, 0)`.
    ///
    /// `S`: with `κ_s = 4 λ_max(R)(tr R + λ_max(R))`, `E‖v‖² ≤ κ_s ‖w‖²`, and
    /// `‖∇J‖ ≥ 2(λ_min(R) + ε)‖w‖ − ‖b(w)‖` where `b` is the nonnegativity
    /// barrier gradient (`‖b‖² ≤ M · slope²`). Squaring with
    /// `(x + y)² ≤ 2x² + 2y²` gives the constants below; without the barrier
    /// the bound is `α = κ_s / (4(λ_min + ε)²)`, `σ_v² = 0`.
    fn noise_envelope(&self) -> NoiseEnvelope<T> {
        match &self.role {
            FinanceRole::ExpectedReturn { .. } => NoiseEnvelope {
                alpha: T::zero(),
                sigma_v2: T::of_usize(self.m),
            },
            FinanceRole::Variance { .. } => {
                let four = T::lit(4.0);
                let lmax = self.r_eig.1;
                let kappa_s = four * lmax * (self.r_trace + lmax);
                let lo = self.r_eig.0 + self.ridge;
                let denom = four * lo * lo;
                if self.nonnegativity {
                    let slope = self.barrier.slope_bound();
                    let two = T::lit(2.0);
                    NoiseEnvelope {
                        alpha: two * kappa_s / denom,
                        sigma_v2: two * kappa_s * T::of_usize(self.m) * slope * slope / denom,
                    }
                } else {
                    NoiseEnvelope {
                        alpha: kappa_s / denom,
                        sigma_v2: T::zero(),
                    }
                }
            }
            FinanceRole::Tax { .. } | FinanceRole::Budget { .. } => NoiseEnvelope::zero(),
        }
    }

    fn noise_covariance(&self, w: &DVector<T>) -> DMatrix<T> {
        let m = self.m;
        match &self.role {
            FinanceRole::ExpectedReturn { .. } => DMatrix::identity(m, m),
            // Gaussian fourth moment: Cov(2 s sᵀ w) = 4((wᵀRw) R + R w wᵀ R)
            FinanceRole::Variance { r_p } => {
                let rw = r_p * w;
                (r_p * w.dot(&rw) + &rw * rw.transpose()) * T::lit(4.0)
            }
            FinanceRole::Tax { .. } | FinanceRole::Budget { .. } => DMatrix::zeros(m, m),
        }
    }

    fn is_deterministic(&self) -> bool {
        matches!(self.role, FinanceRole::Tax { .. } | FinanceRole::Budget { .. })
    }

    fn label(&self) -> String {
        self.kind().name().to_string()
    }
}
