//! Closed-form performance predictions: step-size limits, mean-square
//! perturbation (MSP) bounds, the fixed-point bias, gradient-noise
//! covariance and steady-state MSE.
//!
//! Block-level matrices are the `⊗ I_M` lifts of their node-level
//! counterparts: `𝓐₁ = A₁ ⊗ I_M`, `𝓐₂`, `𝓒` likewise, `𝓜 = Ω ⊗ I_M`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::costs::{network_noise_envelope, SharedCost};
use crate::error::{Error, Result};
use crate::linalg::{lift, one_norm, solve, spectral_radius, stein_sum};
use crate::operators::{aggregate_bounds, BlockVector, Contraction};
use crate::scalar::Real;
use crate::topology::{CombinationSet, StepSizeProfile};

fn declared_bounds<T: Real>(costs: &[SharedCost<T>]) -> Vec<(T, T)> {
    costs.iter().map(|c| c.hessian_bounds()).collect()
}

/// Hessian eigenvalue range of each cost at `w`.
pub fn local_bounds<T: Real>(costs: &[SharedCost<T>], w: &DVector<T>) -> Vec<(T, T)> {
    costs
        .iter()
        .map(|c| {
            let ev = crate::linalg::symmetric_eigenvalues(&c.hessian(w));
            (ev[0], ev[ev.len() - 1])
        })
        .collect()
}

/// `2 / σ_{k,max}` from the declared Hessian bounds.
pub fn step_size_limit_contraction<T: Real>(costs: &[SharedCost<T>], c: &DMatrix<T>) -> Vec<T> {
    step_size_limit_contraction_from_bounds(&declared_bounds(costs), c)
}

pub fn step_size_limit_contraction_from_bounds<T: Real>(bounds: &[(T, T)], c: &DMatrix<T>) -> Vec<T> {
    let (_, hi) = aggregate_bounds(c, bounds);
    hi.into_iter().map(|s| T::lit(2.0) / s).collect()
}

/// `min{σ_max / (σ_max² + D), σ_min / (σ_min² + D)}` with
/// `D = 4 α λ_max² ‖C‖₁²`.
pub fn step_size_limit_mss<T: Real>(costs: &[SharedCost<T>], c: &DMatrix<T>, alpha: T) -> Vec<T> {
    step_size_limit_mss_from_bounds(&declared_bounds(costs), c, alpha)
}

pub fn step_size_limit_mss_from_bounds<T: Real>(bounds: &[(T, T)], c: &DMatrix<T>, alpha: T) -> Vec<T> {
    let (lo, hi) = aggregate_bounds(c, bounds);
    let lambda_max = bounds.iter().fold(T::zero(), |m, b| m.max(b.1));
    let cn = one_norm(c);
    let d = T::lit(4.0) * alpha * lambda_max * lambda_max * cn * cn;
    lo.iter()
        .zip(&hi)
        .map(|(&smin, &smax)| (smax / (smax * smax + d)).min(smin / (smin * smin + d)))
        .collect()
}

/// Constants of the MSP recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData<T: Real> {
    pub sigma_min: Vec<T>,
    pub sigma_max: Vec<T>,
    /// `γ_k`.
    pub gamma: Vec<T>,
    /// Diagonal of `Γ_d = Γ² + 4 α λ_max² ‖C‖₁² Ω²`.
    pub gamma_d: Vec<T>,
    pub lambda_max: T,
    /// `‖C‖₁`, the maximum absolute column sum.
    pub c_one_norm: T,
    pub alpha: T,
    pub sigma_v2: T,
    /// `4 α λ_max² A₁ᵀ P[w_∞ − 𝟙 ⊗ w^o] + max_k(2 α ‖∇J_k(w^o)‖² + σ_v²) 𝟙`.
    pub b_v: DVector<T>,
    /// Diagonal of `Ω`.
    pub omega: Vec<T>,
}

impl<T: Real> SpectralData<T> {
    /// Uses the declared Hessian bounds and network-wide `(α, σ_v²)`.
    /// `bias_power` is `P[w_∞ − 𝟙 ⊗ w^o]`.
    pub fn new(
        costs: &[SharedCost<T>],
        set: &CombinationSet<T>,
        mu: &StepSizeProfile<T>,
        w_o: &DVector<T>,
        bias_power: &DVector<T>,
    ) -> Result<Self> {
        Self::from_bounds(costs, &declared_bounds(costs), set, mu, w_o, bias_power)
    }

    /// Same, with caller-supplied Hessian bounds per cost.
    pub fn from_bounds(
        costs: &[SharedCost<T>],
        bounds: &[(T, T)],
        set: &CombinationSet<T>,
        mu: &StepSizeProfile<T>,
        w_o: &DVector<T>,
        bias_power: &DVector<T>,
    ) -> Result<Self> {
        let n = costs.len();
        if bounds.len() != n || mu.len() != n || bias_power.len() != n || set.c.nrows() != n {
            return Err(Error::Dimension("spectral data: inconsistent network sizes".into()));
        }
        let env = network_noise_envelope(costs);
        let (lo, hi) = aggregate_bounds(&set.c, bounds);
        let contraction = Contraction::from_sigmas(mu, lo, hi);
        let lambda_max = bounds.iter().fold(T::zero(), |m, b| m.max(b.1));
        let cn = one_norm(&set.c);
        let four = T::lit(4.0);
        let two = T::lit(2.0);
        let gamma_d = (0..n)
            .map(|k| {
                let g = contraction.gamma[k];
                let m = mu.get(k);
                g * g + four * env.alpha * lambda_max * lambda_max * cn * cn * m * m
            })
            .collect();
        let floor = costs
            .iter()
            .map(|c| two * env.alpha * c.gradient(w_o).norm_squared() + env.sigma_v2)
            .fold(T::zero(), |m, v| m.max(v));
        let b_v = set.a1.transpose() * bias_power * (four * env.alpha * lambda_max * lambda_max) + DVector::from_element(n, floor);
        Ok(Self {
            sigma_min: contraction.sigma_min,
            sigma_max: contraction.sigma_max,
            gamma: contraction.gamma,
            gamma_d,
            lambda_max,
            c_one_norm: cn,
            alpha: env.alpha,
            sigma_v2: env.sigma_v2,
            b_v,
            omega: mu.as_slice().to_vec(),
        })
    }

    pub fn gamma_d_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.gamma_d))
    }

    fn omega_sq(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_iterator(self.omega.len(), self.omega.iter().map(|&m| m * m)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MspBound<T: Real> {
    /// Bound on `MSP_i` for `i = 0..=horizon`; entry 0 is `msp0`.
    pub trajectory: Vec<DVector<T>>,
    /// `MSP_∞^ub`.
    pub asymptotic: DVector<T>,
    /// `ρ(A₂ᵀ Γ_d A₁ᵀ)`.
    pub rho: T,
}

/// `MSP_i ⪯ X^i (MSP₀ − MSP_∞^ub) + MSP_∞^ub` with `X = A₂ᵀ Γ_d A₁ᵀ` and
/// `MSP_∞^ub = ‖C‖₁² (I − X)⁻¹ A₂ᵀ Ω² b_v`.
pub fn msp_bound_trajectory<T: Real>(
    spectral: &SpectralData<T>,
    a1: &DMatrix<T>,
    a2: &DMatrix<T>,
    msp0: &DVector<T>,
    horizon: usize,
) -> Result<MspBound<T>> {
    let n = msp0.len();
    let x = a2.transpose() * spectral.gamma_d_matrix() * a1.transpose();
    let rho = spectral_radius(&x);
    if !(rho < T::one()) {
        return Err(Error::Unstable {
            what: "A2ᵀ Γ_d A1ᵀ",
            rho: rho.as_f64(),
        });
    }
    let cn2 = spectral.c_one_norm * spectral.c_one_norm;
    let drive = a2.transpose() * spectral.omega_sq() * &spectral.b_v * cn2;
    let asymptotic = solve(&(DMatrix::identity(n, n) - &x), &drive)?;
    let mut trajectory = Vec::with_capacity(horizon + 1);
    let mut transient = msp0 - &asymptotic;
    trajectory.push(msp0.clone());
    for _ in 0..horizon {
        transient = &x * transient;
        trajectory.push(&transient + &asymptotic);
    }
    Ok(MspBound { trajectory, asymptotic, rho })
}

/// `‖C‖₁² ‖b_v‖_∞ μ_max / (2 β σ_min − μ_max (σ_max² + 4 α λ_max ‖C‖₁²))`.
///
/// `λ_max` enters linearly here, as in the published small-step bound.
pub fn msp_o_mu_bound<T: Real>(spectral: &SpectralData<T>, beta: T, sigma_min: T, sigma_max: T) -> Result<T> {
    let mu_max = spectral.omega.iter().copied().fold(T::zero(), |m, v| m.max(v));
    let cn2 = spectral.c_one_norm * spectral.c_one_norm;
    let denom = T::lit(2.0) * beta * sigma_min
        - mu_max * (sigma_max * sigma_max + T::lit(4.0) * spectral.alpha * spectral.lambda_max * cn2);
    if !(denom > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "small-step MSP bound needs a positive denominator, got {denom}; μ_max = {mu_max} is too large"
        )));
    }
    Ok(cn2 * spectral.b_v.amax() * mu_max / denom)
}

/// `(σ_min, σ_max)` over nodes, the scalars the small-step bound takes.
pub fn extreme_sigmas<T: Real>(spectral: &SpectralData<T>) -> (T, T) {
    let lo = spectral.sigma_min.iter().copied().fold(spectral.sigma_min[0], |m, v| m.min(v));
    let hi = spectral.sigma_max.iter().copied().fold(T::zero(), |m, v| m.max(v));
    (lo, hi)
}

/// `g^o = col{∇J_1(w^o), …, ∇J_N(w^o)}`.
pub fn stacked_gradients<T: Real>(costs: &[SharedCost<T>], w_o: &DVector<T>) -> DVector<T> {
    let m = w_o.len();
    let mut g = DVector::zeros(costs.len() * m);
    for (l, c) in costs.iter().enumerate() {
        g.rows_mut(l * m, m).copy_from(&c.gradient(w_o));
    }
    g
}

/// Small-bias approximation of `R_∞`: block `k` is `Σ_l c_lk ∇²J_l(w^o)`.
pub fn r_infinity<T: Real>(costs: &[SharedCost<T>], c: &DMatrix<T>, w_o: &DVector<T>) -> DMatrix<T> {
    let hessians: Vec<DMatrix<T>> = costs.iter().map(|cost| cost.hessian(w_o)).collect();
    assemble_r(c, w_o.len(), |l, _k| hessians[l].clone())
}

fn assemble_r<T: Real>(c: &DMatrix<T>, m: usize, mut h: impl FnMut(usize, usize) -> DMatrix<T>) -> DMatrix<T> {
    let n = c.nrows();
    let mut r = DMatrix::zeros(n * m, n * m);
    for k in 0..n {
        let mut block = DMatrix::zeros(m, m);
        for l in 0..n {
            if c[(l, k)] != T::zero() {
                block += h(l, k) * c[(l, k)];
            }
        }
        r.view_mut((k * m, k * m), (m, m)).copy_from(&block);
    }
    r
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Newton on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(T::lit(0.5 * (1.0 - x)));
        weights.push(T::lit(0.5 * w));
    }
    (nodes, weights)
}

/// `R_∞` from its integral definition: block `k` is
/// `Σ_l c_lk ∫₀¹ ∇²J_l(w^o − t φ̃_k) dt` with `φ̃_k = Σ_l a1_lk w̃_l`,
/// integrated by Gauss–Legendre quadrature. Exact for quadratic costs.
pub fn r_infinity_integral<T: Real>(
    costs: &[SharedCost<T>],
    a1: &DMatrix<T>,
    c: &DMatrix<T>,
    w_o: &DVector<T>,
    w_tilde: &DVector<T>,
    quadrature_nodes: usize,
) -> Result<DMatrix<T>> {
    let m = w_o.len();
    let n = costs.len();
    let wt = BlockVector::from_vector(w_tilde.clone(), n, m)?;
    let phi = crate::operators::combine(a1, &wt)?;
    let (ts, ws) = gauss_legendre::<T>(quadrature_nodes.max(1));
    Ok(assemble_r(c, m, |l, k| {
        let phik = phi.block_owned(k);
        let mut h = DMatrix::zeros(m, m);
        for (t, w) in ts.iter().zip(&ws) {
            h += costs[l].hessian(&(w_o - &phik * *t)) * *w;
        }
        h
    }))
}

struct Lifted<T: Real> {
    a1: DMatrix<T>,
    a2: DMatrix<T>,
    c: DMatrix<T>,
    mu: DMatrix<T>,
}

fn lifted<T: Real>(set: &CombinationSet<T>, mu: &StepSizeProfile<T>, m: usize) -> Lifted<T> {
    Lifted {
        a1: lift(&set.a1, m),
        a2: lift(&set.a2, m),
        c: lift(&set.c, m),
        mu: mu.lifted(m),
    }
}

/// `w̃_∞ = [I − 𝓐₂ᵀ(I − 𝓜R_∞)𝓐₁ᵀ]⁻¹ 𝓐₂ᵀ 𝓜 𝓒ᵀ g^o` for a given `R_∞`.
/// This is also `E w̃_∞`, the limit of the mean error recursion.
pub fn bias_from_r<T: Real>(
    set: &CombinationSet<T>,
    mu: &StepSizeProfile<T>,
    r_inf: &DMatrix<T>,
    g_o: &DVector<T>,
) -> Result<DVector<T>> {
    let mn = g_o.len();
    let m = mn / set.a1.nrows();
    let l = lifted(set, mu, m);
    let x = l.a2.transpose() * (DMatrix::identity(mn, mn) - &l.mu * r_inf) * l.a1.transpose();
    let rhs = l.a2.transpose() * &l.mu * l.c.transpose() * g_o;
    solve(&(DMatrix::identity(mn, mn) - x), &rhs).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "bias system is singular ({msg}); check the step sizes and combination matrices"
        )),
        other => other,
    })
}

/// Fixed-point bias `𝟙 ⊗ w^o − w_∞` with `R_∞` taken at `w^o`.
pub fn bias_fixed_point<T: Real>(
    costs: &[SharedCost<T>],
    a1: &DMatrix<T>,
    a2: &DMatrix<T>,
    c: &DMatrix<T>,
    mu: &StepSizeProfile<T>,
    w_o: &DVector<T>,
) -> Result<DVector<T>> {
    let set = CombinationSet::new(a1.clone(), a2.clone(), c.clone());
    bias_from_r(&set, mu, &r_infinity(costs, c, w_o), &stacked_gradients(costs, w_o))
}

/// Bias with `R_∞` in its integral form, re-evaluated at the current bias
/// estimate until the estimate stops moving. Starts from the small-bias
/// solution; for quadratic costs the first pass is already exact.
pub fn bias_fixed_point_integral<T: Real>(
    costs: &[SharedCost<T>],
    set: &CombinationSet<T>,
    mu: &StepSizeProfile<T>,
    w_o: &DVector<T>,
    quadrature_nodes: usize,
) -> Result<DVector<T>> {
    let g_o = stacked_gradients(costs, w_o);
    let mut w = bias_from_r(set, mu, &r_infinity(costs, &set.c, w_o), &g_o)?;
    let tol = T::lit(1e-15).max(T::machine_epsilon() * T::lit(10.0));
    let max_iters = 100;
    let mut change = T::zero();
    for _ in 0..max_iters {
        let r = r_infinity_integral(costs, &set.a1, &set.c, w_o, &w, quadrature_nodes)?;
        let next = bias_from_r(set, mu, &r, &g_o)?;
        change = (&next - &w).amax();
        let scale = next.amax();
        w = next;
        if change <= tol * scale || scale == T::zero() {
            return Ok(w);
        }
    }
    Err(Error::NoConvergence {
        what: "integral-form bias refinement",
        iterations: max_iters,
        residual: change.as_f64(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroBiasCheck<T> {
    pub holds: bool,
    /// Common value `c₀` when the condition holds.
    pub c0: Option<T>,
    /// Entries of `θᵀ A₂ᵀ Ω Cᵀ`.
    pub row: Vec<T>,
}

/// Tests `θᵀ A₂ᵀ Ω Cᵀ = c₀ 𝟙ᵀ` to a relative tolerance of `1e-10`.
pub fn check_zero_bias_condition<T: Real>(theta: &DVector<T>, a2: &DMatrix<T>, omega: &DMatrix<T>, c: &DMatrix<T>) -> ZeroBiasCheck<T> {
    let row = c * omega * a2 * theta;
    let scale = row.amax();
    let first = row[0];
    let spread = row.iter().fold(T::zero(), |m, &v| m.max((v - first).abs()));
    let holds = spread <= T::lit(1e-10).max(T::machine_epsilon() * T::lit(100.0)) * scale;
    let mean = row.sum() / T::of_usize(row.len());
    ZeroBiasCheck {
        holds,
        c0: holds.then_some(mean),
        row: row.iter().copied().collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseCovarianceMode {
    Analytic,
    /// Sample second moments of `v_l(w^o)` from this many draws.
    MonteCarlo { samples: usize, seed: u64 },
}

/// `R_v`: block `(k, k')` is `Σ_l c_lk c_lk' Cov(v_l(w^o))`, the covariance of
/// `Σ_l col{c_l1 v_l, …, c_lN v_l}`.
pub fn gradient_noise_covariance<T: Real>(
    costs: &[SharedCost<T>],
    w_o: &DVector<T>,
    c: &DMatrix<T>,
    mode: NoiseCovarianceMode,
) -> DMatrix<T> {
    let m = w_o.len();
    let n = costs.len();
    let per_cost: Vec<DMatrix<T>> = match mode {
        NoiseCovarianceMode::Analytic => costs.iter().map(|cost| cost.noise_covariance(w_o)).collect(),
        NoiseCovarianceMode::MonteCarlo { samples, seed } => costs
            .iter()
            .enumerate()
            .map(|(l, cost)| {
                if cost.is_deterministic() {
                    return DMatrix::zeros(m, m);
                }
                let mut rng = crate::strategies::run_rng(seed, l);
                let mut acc = DMatrix::<f64>::zeros(m, m);
                for _ in 0..samples {
                    let v = cost.gradient_noise(w_o, &mut rng).map(|x| x.as_f64());
                    acc.ger(1.0, &v, &v, 1.0);
                }
                (acc / samples.max(1) as f64).map(T::lit)
            })
            .collect(),
    };
    let mut r = DMatrix::zeros(n * m, n * m);
    for k in 0..n {
        for kp in 0..n {
            let mut block = DMatrix::zeros(m, m);
            for l in 0..n {
                let w = c[(l, k)] * c[(l, kp)];
                if w != T::zero() {
                    block += &per_cost[l] * w;
                }
            }
            r.view_mut((k * m, kp * m), (m, m)).copy_from(&block);
        }
    }
    r
}

/// Everything the steady-state MSE expression needs.
#[derive(Clone, Debug)]
pub struct SteadyStateOperators<T: Real> {
    pub n_nodes: usize,
    pub block_dim: usize,
    pub r_inf: DMatrix<T>,
    pub g_o: DVector<T>,
    pub r_v: DMatrix<T>,
    /// `B = 𝓐₁(I − 𝓜R_∞)𝓐₂`, so that `F = B ⊗ B` and `Fσ = vec(B Σ Bᵀ)`.
    pub b: DMatrix<T>,
    /// `𝓐₂ᵀ(I − 𝓜R_∞)𝓐₁ᵀ`.
    pub x: DMatrix<T>,
    /// `y = 𝓐₂ᵀ 𝓜 𝓒ᵀ g^o`.
    pub y: DVector<T>,
    /// `𝓐₂ᵀ 𝓜 R_v 𝓜 𝓐₂`.
    pub noise_term: DMatrix<T>,
    /// `r = vec(𝓐₂ᵀ𝓜R_v𝓜𝓐₂) + y ⊗ y`.
    pub r: DVector<T>,
    /// `Q = 2 𝓐₂ᵀ(I − 𝓜R_∞)𝓐₁ᵀ ⊗ y`.
    pub q: DMatrix<T>,
    /// Dense `F`, only when `(MN)²` is below the configured threshold.
    pub f: Option<DMatrix<T>>,
    pub e_w_inf: DVector<T>,
    /// `ρ(F) = ρ(B)²`.
    pub rho_f: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateOptions {
    pub noise: NoiseCovarianceMode,
    /// Include gradient noise; when false `R_v = 0`.
    pub with_noise: bool,
    /// Build dense `F` when `MN` is at most this.
    pub dense_f_max_mn: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            noise: NoiseCovarianceMode::Analytic,
            with_noise: true,
            dense_f_max_mn: 16,
        }
    }
}

impl<T: Real> SteadyStateOperators<T> {
    pub fn build(
        costs: &[SharedCost<T>],
        set: &CombinationSet<T>,
        mu: &StepSizeProfile<T>,
        w_o: &DVector<T>,
        opts: SteadyStateOptions,
    ) -> Result<Self> {
        let n = costs.len();
        let m = w_o.len();
        let mn = n * m;
        let l = lifted(set, mu, m);
        let r_inf = r_infinity(costs, &set.c, w_o);
        let g_o = stacked_gradients(costs, w_o);
        let r_v = if opts.with_noise {
            gradient_noise_covariance(costs, w_o, &set.c, opts.noise)
        } else {
            DMatrix::zeros(mn, mn)
        };
        let contract = DMatrix::identity(mn, mn) - &l.mu * &r_inf;
        let b = &l.a1 * &contract * &l.a2;
        let x = l.a2.transpose() * &contract * l.a1.transpose();
        let y = l.a2.transpose() * &l.mu * l.c.transpose() * &g_o;
        let noise_term = l.a2.transpose() * &l.mu * &r_v * &l.mu * &l.a2;
        let r = crate::linalg::vec_of(&noise_term) + crate::linalg::vec_of(&(&y * y.transpose()));
        let q = crate::linalg::kron(&x, &DMatrix::from_column_slice(mn, 1, y.as_slice())) * T::lit(2.0);
        let f = (mn <= opts.dense_f_max_mn).then(|| crate::linalg::kron(&b, &b));
        let rho_b = spectral_radius(&b);
        let e_w_inf = bias_from_r(set, mu, &r_inf, &g_o)?;
        Ok(Self {
            n_nodes: n,
            block_dim: m,
            r_inf,
            g_o,
            r_v,
            b,
            x,
            y,
            noise_term,
            r,
            q,
            f,
            e_w_inf,
            rho_f: rho_b * rho_b,
        })
    }

    fn check_stable(&self) -> Result<()> {
        if !(self.rho_f < T::one()) {
            return Err(Error::Unstable {
                what: "F",
                rho: self.rho_f.as_f64(),
            });
        }
        Ok(())
    }

    /// `unvec(r + Q E w̃_∞)` without forming `Q`.
    fn weight_matrix(&self) -> DMatrix<T> {
        let xz = &self.x * &self.e_w_inf;
        &self.noise_term + &self.y * self.y.transpose() + &self.y * xz.transpose() * T::lit(2.0)
    }

    fn selector(&self, target: MseTarget) -> Result<DMatrix<T>> {
        let mn = self.n_nodes * self.block_dim;
        let m = self.block_dim;
        match target {
            MseTarget::Node(k) if k < self.n_nodes => {
                let mut t = DMatrix::zeros(mn, mn);
                for i in 0..m {
                    t[(k * m + i, k * m + i)] = T::one();
                }
                Ok(t)
            }
            MseTarget::Node(k) => Err(Error::InvalidParameter(format!("node {k} out of range"))),
            MseTarget::Network => Ok(DMatrix::identity(mn, mn) / T::of_usize(self.n_nodes)),
        }
    }

    /// Evaluates `(r + Q E w̃_∞)ᵀ σ` with `σ = (I − F)⁻¹ t` by summing
    /// `Σ_j B^j T (Bᵀ)^j` with Stein doubling.
    pub fn mse(&self, target: MseTarget) -> Result<T> {
        self.check_stable()?;
        let sigma = stein_sum(&self.b, &self.selector(target)?)?;
        Ok(self.weight_matrix().component_mul(&sigma).sum())
    }

    /// Same quantity through the dense `(MN)² × (MN)²` system; needs `f`.
    pub fn mse_dense(&self, target: MseTarget) -> Result<T> {
        self.check_stable()?;
        let f = self
            .f
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("dense F was not built for this network size".into()))?;
        let t = crate::linalg::vec_of(&self.selector(target)?);
        let d = f.nrows();
        let sigma = solve(&(DMatrix::identity(d, d) - f), &t)?;
        let weight = &self.r + &self.q * &self.e_w_inf;
        Ok(weight.dot(&sigma))
    }

    /// `Σ` for a selector, as a matrix (for callers needing weighted variances).
    pub fn sigma_matrix(&self, target: MseTarget) -> Result<DMatrix<T>> {
        self.check_stable()?;
        stein_sum(&self.b, &self.selector(target)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MseTarget {
    Node(usize),
    Network,
}

/// Steady-state MSE of one node or of the network average.
pub fn steady_state_mse<T: Real>(ops: &SteadyStateOperators<T>, target: MseTarget) -> Result<T> {
    ops.mse(target)
}

/// Per-node block powers of a stacked vector.
pub fn block_power<T: Real>(v: &DVector<T>, n: usize) -> Result<DVector<T>> {
    let m = v.len() / n.max(1);
    Ok(crate::operators::power(&BlockVector::from_vector(v.clone(), n, m)?))
}

/// Analytical summary for one strategy and step-size profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub strategy: String,
    pub mu_max: f64,
    /// Predicted `MSE_k` per node.
    pub node_mse: Vec<f64>,
    pub network_mse: f64,
    pub network_mse_db: f64,
    /// `w̃_∞` stacked.
    pub bias: Vec<f64>,
    /// `‖w̃_k,∞‖²` per node.
    pub bias_power: Vec<f64>,
    /// `(1/N) ‖w̃_∞‖²`.
    pub bias_power_network: f64,
    pub rho_f: f64,
    pub step_limit_contraction: Vec<f64>,
    pub step_limit_mss: Vec<f64>,
    pub gamma: Vec<f64>,
    pub gamma_d: Vec<f64>,
    /// `MSP_∞^ub`, absent when `A₂ᵀ Γ_d A₁ᵀ` is not stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msp_upper_bound: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msp_o_mu_bound: Option<f64>,
    /// Which Hessian bounds fed `Γ`: `declared` or `local`.
    pub curvature: String,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvatureSource {
    /// The costs' global Hessian envelopes.
    Declared,
    /// Hessian eigenvalues at `w^o`.
    Local,
}

fn widen<T: Real>(v: impl IntoIterator<Item = T>) -> Vec<f64> {
    v.into_iter().map(|x| x.as_f64()).collect()
}

impl PerformanceReport {
    pub fn compute<T: Real>(
        strategy: &str,
        costs: &[SharedCost<T>],
        set: &CombinationSet<T>,
        mu: &StepSizeProfile<T>,
        w_o: &DVector<T>,
        curvature: CurvatureSource,
        opts: SteadyStateOptions,
    ) -> Result<Self> {
        let n = costs.len();
        let ops = SteadyStateOperators::build(costs, set, mu, w_o, opts)?;
        let node_mse = (0..n).map(|k| ops.mse(MseTarget::Node(k))).collect::<Result<Vec<T>>>()?;
        let network = ops.mse(MseTarget::Network)?;
        let bias_power = block_power(&ops.e_w_inf, n)?;
        let bounds = match curvature {
            CurvatureSource::Declared => declared_bounds(costs),
            CurvatureSource::Local => local_bounds(costs, w_o),
        };
        let spectral = SpectralData::from_bounds(costs, &bounds, set, mu, w_o, &bias_power)?;
        let mut notes = Vec::new();
        let msp_upper_bound = match msp_bound_trajectory(&spectral, &set.a1, &set.a2, &DVector::zeros(n), 0) {
            Ok(b) => Some(widen(b.asymptotic.iter().copied())),
            Err(e) => {
                notes.push(format!("MSP bound unavailable: {e}"));
                None
            }
        };
        let (smin, smax) = extreme_sigmas(&spectral);
        let msp_o_mu_bound = match msp_o_mu_bound(&spectral, mu.beta_min(), smin, smax) {
            Ok(v) => Some(v.as_f64()),
            Err(e) => {
                notes.push(format!("small-step MSP bound unavailable: {e}"));
                None
            }
        };
        let network = network.as_f64();
        Ok(Self {
            strategy: strategy.to_string(),
            mu_max: mu.mu_max().as_f64(),
            node_mse: widen(node_mse),
            network_mse: network,
            network_mse_db: 10.0 * network.log10(),
            bias: widen(ops.e_w_inf.iter().copied()),
            bias_power: widen(bias_power.iter().copied()),
            bias_power_network: ops.e_w_inf.norm_squared().as_f64() / n as f64,
            rho_f: ops.rho_f.as_f64(),
            step_limit_contraction: widen(step_size_limit_contraction_from_bounds(&bounds, &set.c)),
            step_limit_mss: widen(step_size_limit_mss_from_bounds(&bounds, &set.c, spectral.alpha)),
            gamma: widen(spectral.gamma.iter().copied()),
            gamma_d: widen(spectral.gamma_d.iter().copied()),
            msp_upper_bound,
            msp_o_mu_bound,
            curvature: match curvature {
                CurvatureSource::Declared => "declared".into(),
                CurvatureSource::Local => "local".into(),
            },
            notes,
        })
    }

    pub fn to_text(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_text(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }
}
