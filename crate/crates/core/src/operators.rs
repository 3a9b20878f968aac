//! Block vectors and the operators the diffusion recursions are built from:
//! combination `T_A`, gradient descent `T_G`, the power map `P`, and their
//! cascade `T_d = T_{A2} ∘ T_G ∘ T_{A1}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::costs::SharedCost;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::topology::StepSizeProfile;

/// `N` stacked blocks of dimension `M`, stored contiguously block after block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector<T: Real> {
    data: DVector<T>,
    n_blocks: usize,
    block_dim: usize,
}

impl<T: Real> BlockVector<T> {
    pub fn zeros(n_blocks: usize, block_dim: usize) -> Self {
        assert!(block_dim >= 1, "block dimension must be at least 1");
        Self {
            data: DVector::zeros(n_blocks * block_dim),
            n_blocks,
            block_dim,
        }
    }

    pub fn from_vector(data: DVector<T>, n_blocks: usize, block_dim: usize) -> Result<Self> {
        if block_dim == 0 || data.len() != n_blocks * block_dim {
            return Err(Error::Dimension(format!(
                "vector of length {} cannot hold {n_blocks} blocks of size {block_dim}",
                data.len()
            )));
        }
        Ok(Self { data, n_blocks, block_dim })
    }

    pub fn from_blocks(blocks: &[DVector<T>]) -> Result<Self> {
        let m = blocks.first().map_or(0, |b| b.len());
        if m == 0 || blocks.iter().any(|b| b.len() != m) {
            return Err(Error::Dimension("blocks must share a positive dimension".into()));
        }
        let mut out = Self::zeros(blocks.len(), m);
        for (k, b) in blocks.iter().enumerate() {
            out.set_block(k, b);
        }
        Ok(out)
    }

    /// `𝟙_N ⊗ w`.
    pub fn replicate(w: &DVector<T>, n_blocks: usize) -> Self {
        let m = w.len();
        let mut out = Self::zeros(n_blocks, m);
        for k in 0..n_blocks {
            out.set_block(k, w);
        }
        out
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn block(&self, k: usize) -> DVectorView<'_, T> {
        self.data.rows(k * self.block_dim, self.block_dim)
    }

    pub fn block_owned(&self, k: usize) -> DVector<T> {
        self.block(k).into_owned()
    }

    pub fn set_block(&mut self, k: usize, v: &DVector<T>) {
        self.data.rows_mut(k * self.block_dim, self.block_dim).copy_from(v);
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<T> {
        self.data
    }

    /// Column `k` of the `M × N` view is block `k`.
    pub fn as_matrix(&self) -> DMatrix<T> {
        DMatrix::from_column_slice(self.block_dim, self.n_blocks, self.data.as_slice())
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n_blocks != other.n_blocks || self.block_dim != other.block_dim {
            return Err(Error::Dimension(format!(
                "block vectors {}x{} and {}x{}",
                self.n_blocks, self.block_dim, other.n_blocks, other.block_dim
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            data: &self.data - &other.data,
            ..*self
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            data: &self.data + &other.data,
            ..*self
        })
    }

    pub fn scale(&self, a: T) -> Self {
        Self {
            data: &self.data * a,
            ..*self
        }
    }

    /// `N` lines of `M` space-separated decimals.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl<T: Real> fmt::Display for BlockVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.n_blocks {
            let row: Vec<String> = self.block(k).iter().map(|v| format!("{:e}", v.as_f64())).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

impl<T: Real> FromStr for BlockVector<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let vals = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map(T::lit)
                        .map_err(|e| Error::Config(format!("bad number `{t}`: {e}")))
                })
                .collect::<Result<Vec<T>>>()?;
            blocks.push(DVector::from_vec(vals));
        }
        Self::from_blocks(&blocks)
    }
}

/// The gradient-descent operator's data: costs, gradient weights `C` and
/// step sizes.
#[derive(Clone, Debug)]
pub struct GradientDescentSpec<T: Real> {
    costs: Vec<SharedCost<T>>,
    c: DMatrix<T>,
    mu: StepSizeProfile<T>,
}

impl<T: Real> GradientDescentSpec<T> {
    /// Checks dimensions, that `C` is right-stochastic and non-negative, and
    /// that every node sees positive aggregate curvature
    /// `Σ_l c_lk λ_{l,min} > 0`.
    pub fn new(costs: Vec<SharedCost<T>>, c: DMatrix<T>, mu: StepSizeProfile<T>) -> Result<Self> {
        let n = costs.len();
        if n == 0 {
            return Err(Error::InvalidParameter("no costs supplied".into()));
        }
        if c.nrows() != n || c.ncols() != n || mu.len() != n {
            return Err(Error::Dimension(format!(
                "{n} costs, C is {}x{}, {} step sizes",
                c.nrows(),
                c.ncols(),
                mu.len()
            )));
        }
        let m = costs[0].dim();
        if costs.iter().any(|cost| cost.dim() != m) {
            return Err(Error::Dimension("costs disagree on the decision dimension".into()));
        }
        let tol = T::lit(1e-12).max(T::machine_epsilon() * T::lit(100.0));
        for l in 0..n {
            let row_sum = c.row(l).sum();
            if (row_sum - T::one()).abs() > tol || c.row(l).iter().any(|&v| v < T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "C must be non-negative and right-stochastic; row {l} sums to {row_sum}"
                )));
            }
        }
        let spec = Self { costs, c, mu };
        let (sigma_min, _) = spec.sigma_bounds();
        if let Some((k, s)) = sigma_min.iter().enumerate().find(|(_, s)| !(**s > T::zero())) {
            return Err(Error::InvalidParameter(format!(
                "node {k}: aggregate curvature Σ_l c_lk λ_l,min = {s} must be positive"
            )));
        }
        Ok(spec)
    }

    pub fn costs(&self) -> &[SharedCost<T>] {
        &self.costs
    }

    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn mu(&self) -> &StepSizeProfile<T> {
        &self.mu
    }

    pub fn with_mu(&self, mu: StepSizeProfile<T>) -> Result<Self> {
        Self::new(self.costs.clone(), self.c.clone(), mu)
    }

    pub fn n_nodes(&self) -> usize {
        self.costs.len()
    }

    pub fn block_dim(&self) -> usize {
        self.costs[0].dim()
    }

    /// `σ_{k,min} = Σ_l c_lk λ_{l,min}` and `σ_{k,max}` from declared bounds.
    pub fn sigma_bounds(&self) -> (Vec<T>, Vec<T>) {
        let bounds: Vec<(T, T)> = self.costs.iter().map(|c| c.hessian_bounds()).collect();
        aggregate_bounds(&self.c, &bounds)
    }

    /// The same aggregation using Hessian eigenvalues at a specific point,
    /// i.e. the curvature the iteration actually sees near `w`.
    pub fn local_sigma_bounds(&self, w: &DVector<T>) -> (Vec<T>, Vec<T>) {
        let bounds: Vec<(T, T)> = self
            .costs
            .iter()
            .map(|c| {
                let ev = crate::linalg::symmetric_eigenvalues(&c.hessian(w));
                (ev[0], ev[ev.len() - 1])
            })
            .collect();
        aggregate_bounds(&self.c, &bounds)
    }
}

/// `σ_k = Σ_l c_lk λ_l` for both ends of the Hessian envelopes.
pub fn aggregate_bounds<T: Real>(c: &DMatrix<T>, bounds: &[(T, T)]) -> (Vec<T>, Vec<T>) {
    let n = bounds.len();
    let mut lo = vec![T::zero(); n];
    let mut hi = vec![T::zero(); n];
    for k in 0..n {
        for l in 0..n {
            lo[k] += c[(l, k)] * bounds[l].0;
            hi[k] += c[(l, k)] * bounds[l].1;
        }
    }
    (lo, hi)
}

fn check_square<T: Real>(a: &DMatrix<T>, n: usize, what: &str) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::Dimension(format!("{what} is {}x{}, expected {n}x{n}", a.nrows(), a.ncols())));
    }
    Ok(())
}

/// `T_A(x) = (Aᵀ ⊗ I_M) x`: block `k` becomes `Σ_l a_lk x_l`.
pub fn combine<T: Real>(a: &DMatrix<T>, x: &BlockVector<T>) -> Result<BlockVector<T>> {
    check_square(a, x.n_blocks(), "combination matrix")?;
    let out = x.as_matrix() * a;
    BlockVector::from_vector(DVector::from_column_slice(out.as_slice()), x.n_blocks(), x.block_dim())
}

/// `T_G(x)`: block `k` becomes `x_k − μ_k Σ_l c_lk ∇J_l(x_k)` with true gradients.
pub fn gradient_descent<T: Real>(spec: &GradientDescentSpec<T>, x: &BlockVector<T>) -> Result<BlockVector<T>> {
    let n = spec.n_nodes();
    if x.n_blocks() != n || x.block_dim() != spec.block_dim() {
        return Err(Error::Dimension(format!(
            "state is {}x{}, spec expects {n}x{}",
            x.n_blocks(),
            x.block_dim(),
            spec.block_dim()
        )));
    }
    let mut out = x.clone();
    for k in 0..n {
        let xk = x.block_owned(k);
        let mut g = DVector::zeros(xk.len());
        for l in 0..n {
            let w = spec.c[(l, k)];
            if w != T::zero() {
                g += spec.costs[l].gradient(&xk) * w;
            }
        }
        out.set_block(k, &(xk - g * spec.mu.get(k)));
    }
    Ok(out)
}

/// `P[x]`: per-block squared Euclidean norms.
pub fn power<T: Real>(x: &BlockVector<T>) -> DVector<T> {
    DVector::from_fn(x.n_blocks(), |k, _| x.block(k).norm_squared())
}

/// `max_k ‖x_k‖`.
pub fn block_max_norm<T: Real>(x: &BlockVector<T>) -> T {
    (0..x.n_blocks()).map(|k| x.block(k).norm()).fold(T::zero(), |m, v| m.max(v))
}

/// `T_d(x) = T_{A2}(T_G(T_{A1}(x)))`.
pub fn diffuse<T: Real>(
    a1: &DMatrix<T>,
    spec: &GradientDescentSpec<T>,
    a2: &DMatrix<T>,
    x: &BlockVector<T>,
) -> Result<BlockVector<T>> {
    combine(a2, &gradient_descent(spec, &combine(a1, x)?)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Contraction<T: Real> {
    pub sigma_min: Vec<T>,
    pub sigma_max: Vec<T>,
    /// `γ_k = max(|1 − μ_k σ_{k,max}|, |1 − μ_k σ_{k,min}|)`.
    pub gamma: Vec<T>,
    /// `‖Γ‖_∞ = max_k γ_k`.
    pub norm: T,
}

impl<T: Real> Contraction<T> {
    pub fn from_sigmas(mu: &StepSizeProfile<T>, sigma_min: Vec<T>, sigma_max: Vec<T>) -> Self {
        let gamma: Vec<T> = (0..mu.len())
            .map(|k| {
                let m = mu.get(k);
                (T::one() - m * sigma_max[k]).abs().max((T::one() - m * sigma_min[k]).abs())
            })
            .collect();
        let norm = gamma.iter().copied().fold(T::zero(), |a, b| a.max(b));
        Self {
            sigma_min,
            sigma_max,
            gamma,
            norm,
        }
    }

    /// `Γ = diag{γ_k}`.
    pub fn gamma_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.gamma))
    }
}

/// Per-node contraction factors from the declared Hessian bounds.
pub fn contraction_factor<T: Real>(spec: &GradientDescentSpec<T>) -> Contraction<T> {
    let (lo, hi) = spec.sigma_bounds();
    Contraction::from_sigmas(spec.mu(), lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepSizeMode {
    /// Refuse to iterate when some `μ_k ≥ 2/σ_{k,max}`.
    Enforce,
    /// Record the violation and iterate anyway.
    WarnAndProceed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub mode: StepSizeMode,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 1_000_000,
            mode: StepSizeMode::Enforce,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPoint<T: Real> {
    pub point: BlockVector<T>,
    pub iterations: usize,
    /// `‖x_last − x_prev‖_{b,∞}` at exit.
    pub last_step: T,
    /// Nodes whose step size broke the contraction condition.
    pub warnings: Vec<String>,
}

/// Iterates `x ← f(x)` until successive iterates differ by less than `tol`
/// in block maximum norm.
pub fn iterate_to_fixed_point<T, F>(x0: &BlockVector<T>, tol: T, max_iters: usize, mut f: F) -> Result<(BlockVector<T>, usize, T)>
where
    T: Real,
    F: FnMut(&BlockVector<T>) -> Result<BlockVector<T>>,
{
    let mut x = x0.clone();
    let mut step = T::zero();
    for i in 1..=max_iters {
        let next = f(&x)?;
        step = block_max_norm(&next.sub(&x)?);
        x = next;
        if !step.is_finite() {
            return Err(Error::Unstable {
                what: "fixed-point iteration (iterates diverged)",
                rho: f64::INFINITY,
            });
        }
        if step < tol {
            return Ok((x, i, step));
        }
    }
    Err(Error::NoConvergence {
        what: "fixed-point iteration",
        iterations: max_iters,
        residual: step.as_f64(),
    })
}

/// Step-size violations of `0 < μ_k < 2/σ_{k,max}`.
pub fn step_size_violations<T: Real>(mu: &StepSizeProfile<T>, sigma_max: &[T]) -> Vec<(usize, T, T)> {
    (0..mu.len())
        .filter_map(|k| {
            let limit = T::lit(2.0) / sigma_max[k];
            (mu.get(k) >= limit).then_some((k, mu.get(k), limit))
        })
        .collect()
}

/// Unique fixed point of `T_d` by direct iteration.
pub fn find_fixed_point<T: Real>(
    a1: &DMatrix<T>,
    spec: &GradientDescentSpec<T>,
    a2: &DMatrix<T>,
    x0: &BlockVector<T>,
    opts: FixedPointOptions,
) -> Result<FixedPoint<T>> {
    let (_, hi) = spec.sigma_bounds();
    let mut warnings = Vec::new();
    for (k, mu, limit) in step_size_violations(spec.mu(), &hi) {
        if opts.mode == StepSizeMode::Enforce {
            return Err(Error::StepSize {
                condition: "0 < μ_k < 2/σ_k,max",
                node: k,
                mu: mu.as_f64(),
                limit: limit.as_f64(),
            });
        }
        warnings.push(format!(
            "node {k}: μ = {mu} is not below 2/σ_k,max = {limit}; contraction is not guaranteed"
        ));
    }
    let tol = T::lit(opts.tol);
    let (point, iterations, last_step) = iterate_to_fixed_point(x0, tol, opts.max_iters, |x| diffuse(a1, spec, a2, x))?;
    Ok(FixedPoint {
        point,
        iterations,
        last_step,
        warnings,
    })
}
