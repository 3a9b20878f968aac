//! Stochastic diffusion recursions, the consensus and centralized
//! baselines, and Monte Carlo learning curves.

use std::io;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::costs::SharedCost;
use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::operators::{combine, BlockVector};
use crate::scalar::{tolerance, Real};
use crate::topology::StepSizeProfile;

/// Monte Carlo runs handled by one work item. Fixing it keeps the reduction
/// order, and therefore every output bit, independent of the thread count.
const RUNS_PER_CHUNK: usize = 4;

/// Which recursion to run.
#[derive(Clone, Debug, PartialEq)]
pub enum Variant<T: Real> {
    General { a1: DMatrix<T>, c: DMatrix<T>, a2: DMatrix<T> },
    Atc { a: DMatrix<T> },
    Cta { a: DMatrix<T> },
    Consensus { a: DMatrix<T> },
    Centralized,
}

impl<T: Real> Variant<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::General { .. } => "general",
            Variant::Atc { .. } => "atc",
            Variant::Cta { .. } => "cta",
            Variant::Consensus { .. } => "consensus",
            Variant::Centralized => "centralized",
        }
    }
}

#[derive(Clone, Debug)]
pub struct StrategyConfig<T: Real> {
    pub variant: Variant<T>,
    pub step_sizes: StepSizeProfile<T>,
    /// `w_{-1}`; zero when absent.
    pub initial_state: Option<BlockVector<T>>,
    pub horizon: usize,
    pub monte_carlo_runs: usize,
    pub seed: u64,
    /// Use stochastic gradients. When false every recursion is driven by
    /// true gradients and each run is identical.
    pub noise: bool,
    /// Trailing share of the horizon averaged for steady-state estimates.
    pub steady_state_fraction: f64,
}

impl<T: Real> StrategyConfig<T> {
    pub fn new(variant: Variant<T>, step_sizes: StepSizeProfile<T>) -> Self {
        Self {
            variant,
            step_sizes,
            initial_state: None,
            horizon: 10_000,
            monte_carlo_runs: 200,
            seed: 0,
            noise: true,
            steady_state_fraction: 0.2,
        }
    }

    pub fn name(&self) -> &'static str {
        self.variant.name()
    }

    /// One iteration of the configured recursion.
    pub fn step(&self, state: &BlockVector<T>, costs: &[SharedCost<T>], rng: Option<&mut dyn RngCore>) -> Result<BlockVector<T>> {
        let mu = &self.step_sizes;
        match &self.variant {
            Variant::General { a1, c, a2 } => general_diffusion_step(state, a1, c, a2, costs, mu, rng),
            Variant::Atc { a } => atc_step(state, a, costs, mu, rng),
            Variant::Cta { a } => cta_step(state, a, costs, mu, rng),
            Variant::Consensus { a } => consensus_step(state, a, costs, mu, rng),
            Variant::Centralized => {
                let w = centralized_step(&state.block_owned(0), costs, mu.mu_max(), rng)?;
                Ok(BlockVector::replicate(&w, state.n_blocks()))
            }
        }
    }

    fn validate(&self, costs: &[SharedCost<T>]) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.monte_carlo_runs == 0 {
            return Err(Error::InvalidParameter("at least one Monte Carlo run is required".into()));
        }
        if !(self.steady_state_fraction > 0.0 && self.steady_state_fraction <= 1.0) {
            return Err(Error::InvalidParameter("steady-state fraction must lie in (0, 1]".into()));
        }
        check_network(costs, self.step_sizes.len()).map(|_| ())
    }
}

fn check_network<T: Real>(costs: &[SharedCost<T>], n: usize) -> Result<usize> {
    if costs.is_empty() || costs.len() != n {
        return Err(Error::Dimension(format!("{} costs for {n} step sizes", costs.len())));
    }
    let m = costs[0].dim();
    if costs.iter().any(|c| c.dim() != m) {
        return Err(Error::Dimension("costs disagree on the decision dimension".into()));
    }
    Ok(m)
}

fn check_state<T: Real>(state: &BlockVector<T>, costs: &[SharedCost<T>]) -> Result<()> {
    if state.n_blocks() != costs.len() || state.block_dim() != costs[0].dim() {
        return Err(Error::Dimension(format!(
            "state is {}x{}, network is {}x{}",
            state.n_blocks(),
            state.block_dim(),
            costs.len(),
            costs[0].dim()
        )));
    }
    Ok(())
}

fn grad<T: Real>(cost: &SharedCost<T>, w: &DVector<T>, rng: &mut Option<&mut dyn RngCore>) -> DVector<T> {
    match rng {
        Some(r) => cost.stochastic_gradient(w, &mut **r),
        None => cost.gradient(w),
    }
}

/// `φ = T_{A1}(w)`, `ψ_k = φ_k − μ_k Σ_l c_lk ∇̂J_l(φ_k)`, `w = T_{A2}(ψ)`.
///
/// With `rng = None` true gradients are used, which makes this exactly
/// [`crate::operators::diffuse`]. Each pair `(l, k)` with `c_lk ≠ 0` draws
/// its own gradient noise.
pub fn general_diffusion_step<T: Real>(
    state: &BlockVector<T>,
    a1: &DMatrix<T>,
    c: &DMatrix<T>,
    a2: &DMatrix<T>,
    costs: &[SharedCost<T>],
    mu: &StepSizeProfile<T>,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<BlockVector<T>> {
    check_state(state, costs)?;
    let n = costs.len();
    let phi = combine(a1, state)?;
    let mut psi = phi.clone();
    for k in 0..n {
        let phik = phi.block_owned(k);
        let mut g = DVector::zeros(phik.len());
        for l in 0..n {
            let w = c[(l, k)];
            if w != T::zero() {
                g += grad(&costs[l], &phik, &mut rng) * w;
            }
        }
        psi.set_block(k, &(phik - g * mu.get(k)));
    }
    combine(a2, &psi)
}

/// Adapt then combine: `ψ_k = w_k − μ_k ∇̂J_k(w_k)`, `w = T_A(ψ)`.
pub fn atc_step<T: Real>(
    state: &BlockVector<T>,
    a: &DMatrix<T>,
    costs: &[SharedCost<T>],
    mu: &StepSizeProfile<T>,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<BlockVector<T>> {
    check_state(state, costs)?;
    let mut psi = state.clone();
    for (k, cost) in costs.iter().enumerate() {
        let wk = state.block_owned(k);
        let g = grad(cost, &wk, &mut rng);
        psi.set_block(k, &(wk - g * mu.get(k)));
    }
    combine(a, &psi)
}

/// Combine then adapt: `φ = T_A(w)`, `w_k = φ_k − μ_k ∇̂J_k(φ_k)`.
pub fn cta_step<T: Real>(
    state: &BlockVector<T>,
    a: &DMatrix<T>,
    costs: &[SharedCost<T>],
    mu: &StepSizeProfile<T>,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<BlockVector<T>> {
    check_state(state, costs)?;
    let mut out = combine(a, state)?;
    for (k, cost) in costs.iter().enumerate() {
        let phik = out.block_owned(k);
        let g = grad(cost, &phik, &mut rng);
        out.set_block(k, &(phik - g * mu.get(k)));
    }
    Ok(out)
}

/// `w_k = Σ_l a_lk w_l − μ_k ∇̂J_k(w_k)`: the gradient is taken at the node's
/// previous iterate, not at the combined value.
pub fn consensus_step<T: Real>(
    state: &BlockVector<T>,
    a: &DMatrix<T>,
    costs: &[SharedCost<T>],
    mu: &StepSizeProfile<T>,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<BlockVector<T>> {
    check_state(state, costs)?;
    let mut out = combine(a, state)?;
    for (k, cost) in costs.iter().enumerate() {
        let g = grad(cost, &state.block_owned(k), &mut rng);
        let next = out.block_owned(k) - g * mu.get(k);
        out.set_block(k, &next);
    }
    Ok(out)
}

/// `w ← w − μ (1/N) Σ_k ∇̂J_k(w)`.
pub fn centralized_step<T: Real>(w: &DVector<T>, costs: &[SharedCost<T>], mu: T, mut rng: Option<&mut dyn RngCore>) -> Result<DVector<T>> {
    if costs.is_empty() || costs.iter().any(|c| c.dim() != w.len()) {
        return Err(Error::Dimension("centralized step: cost and state dimensions differ".into()));
    }
    let mut g = DVector::zeros(w.len());
    for cost in costs {
        g += grad(cost, w, &mut rng);
    }
    Ok(w - g * (mu / T::of_usize(costs.len())))
}

/// The RNG for run `run` of an experiment seeded with `seed`: a ChaCha8
/// generator keyed by `seed` on stream `run`, so runs are independent and
/// each can be regenerated on its own.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Averaged squared-error curves.
#[derive(Clone, Debug, PartialEq)]
pub struct LearningCurve {
    pub strategy: String,
    pub runs: usize,
    /// `(1/N) Σ_k E‖w_k,i − ref_k‖²` for `i = 0..horizon`, i.e. after each step.
    pub network_mse: Vec<f64>,
    /// Standard error of `network_mse` across runs.
    pub network_sem: Vec<f64>,
    /// `E‖w_k,i − ref_k‖²`, indexed `[i][k]`.
    pub node_mse: Vec<Vec<f64>>,
    pub node_sem: Vec<Vec<f64>>,
    /// First iteration of the steady-state window.
    pub steady_state_start: usize,
    pub steady_state_mse: f64,
    /// Standard error of the steady-state mean across runs.
    pub steady_state_se: f64,
    pub steady_state_node_mse: Vec<f64>,
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl LearningCurve {
    pub fn horizon(&self) -> usize {
        self.network_mse.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_mse.first().map_or(0, Vec::len)
    }

    pub fn network_mse_db(&self) -> Vec<f64> {
        self.network_mse.iter().map(|&v| to_db(v)).collect()
    }

    pub fn steady_state_db(&self) -> f64 {
        to_db(self.steady_state_mse)
    }

    /// Header row, then one row per iteration.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string(), "network_mse".into(), "network_mse_db".into()];
        header.extend((0..self.n_nodes()).map(|k| format!("node_{k}")));
        w.write_record(&header)?;
        for i in 0..self.horizon() {
            let mut row = vec![(i + 1).to_string(), format!("{:e}", self.network_mse[i]), format!("{:e}", to_db(self.network_mse[i]))];
            row.extend(self.node_mse[i].iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads back the table produced by [`LearningCurve::write_csv`]; lines
    /// starting with `#` are ignored. Standard errors are not stored and come
    /// back as zero.
    pub fn read_csv<R: io::Read>(input: R, strategy: &str, steady_state_fraction: f64) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut network = Vec::new();
        let mut nodes = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("bad CSV number `{s}`: {e}")));
            network.push(parse(&rec[1])?);
            nodes.push(rec.iter().skip(3).map(parse).collect::<Result<Vec<f64>>>()?);
        }
        let n = nodes.first().map_or(0, Vec::len);
        let horizon = network.len();
        let start = steady_start(horizon, steady_state_fraction);
        let window = (horizon - start).max(1) as f64;
        let steady_node = (0..n).map(|k| nodes[start..].iter().map(|r| r[k]).sum::<f64>() / window).collect();
        Ok(Self {
            strategy: strategy.to_string(),
            runs: 0,
            steady_state_mse: network[start..].iter().sum::<f64>() / window,
            network_sem: vec![0.0; horizon],
            node_sem: vec![vec![0.0; n]; horizon],
            network_mse: network,
            node_mse: nodes,
            steady_state_start: start,
            steady_state_se: 0.0,
            steady_state_node_mse: steady_node,
        })
    }
}

fn steady_start(horizon: usize, fraction: f64) -> usize {
    let window = ((horizon as f64 * fraction).round() as usize).clamp(1, horizon.max(1));
    horizon - window
}

struct Accumulator {
    node_sum: Vec<f64>,
    node_sumsq: Vec<f64>,
    net_sum: Vec<f64>,
    net_sumsq: Vec<f64>,
    steady_runs: Vec<f64>,
    steady_node_sum: Vec<f64>,
}

impl Accumulator {
    fn new(horizon: usize, n: usize) -> Self {
        Self {
            node_sum: vec![0.0; horizon * n],
            node_sumsq: vec![0.0; horizon * n],
            net_sum: vec![0.0; horizon],
            net_sumsq: vec![0.0; horizon],
            steady_runs: Vec::new(),
            steady_node_sum: vec![0.0; n],
        }
    }

    fn merge(&mut self, other: Accumulator) {
        let add = |a: &mut Vec<f64>, b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.node_sum, &other.node_sum);
        add(&mut self.node_sumsq, &other.node_sumsq);
        add(&mut self.net_sum, &other.net_sum);
        add(&mut self.net_sumsq, &other.net_sumsq);
        add(&mut self.steady_node_sum, &other.steady_node_sum);
        self.steady_runs.extend(other.steady_runs);
    }
}

fn sem(sum: f64, sumsq: f64, runs: usize) -> f64 {
    if runs < 2 {
        return 0.0;
    }
    let r = runs as f64;
    let mean = sum / r;
    let var = ((sumsq - r * mean * mean) / (r - 1.0)).max(0.0);
    (var / r).sqrt()
}

/// Independent trajectories averaged into learning curves. The error at node
/// `k` is measured against block `k` of `reference` (`𝟙 ⊗ w^o` for MSE, the
/// noise-free fixed point for mean-square perturbation).
pub fn run_monte_carlo<T: Real>(config: &StrategyConfig<T>, costs: &[SharedCost<T>], reference: &BlockVector<T>) -> Result<LearningCurve> {
    config.validate(costs)?;
    check_state(reference, costs)?;
    let n = costs.len();
    let m = costs[0].dim();
    let horizon = config.horizon;
    let start = steady_start(horizon, config.steady_state_fraction);
    let window = (horizon - start) as f64;
    let init = match &config.initial_state {
        Some(x) => {
            check_state(x, costs)?;
            x.clone()
        }
        None => BlockVector::zeros(n, m),
    };
    // without noise every run is the same trajectory
    let runs = if config.noise { config.monte_carlo_runs } else { 1 };

    let one_chunk = |chunk: usize| -> Result<Accumulator> {
        let mut acc = Accumulator::new(horizon, n);
        for run in chunk * RUNS_PER_CHUNK..((chunk + 1) * RUNS_PER_CHUNK).min(runs) {
            let mut rng = run_rng(config.seed, run);
            let mut state = init.clone();
            let mut steady = 0.0;
            let mut steady_node = vec![0.0; n];
            for i in 0..horizon {
                let r: Option<&mut dyn RngCore> = if config.noise { Some(&mut rng) } else { None };
                state = config.step(&state, costs, r)?;
                let mut net = 0.0;
                for k in 0..n {
                    let e = (state.block(k) - reference.block(k)).norm_squared().as_f64();
                    acc.node_sum[i * n + k] += e;
                    acc.node_sumsq[i * n + k] += e * e;
                    net += e;
                    if i >= start {
                        steady_node[k] += e;
                    }
                }
                let net = net / n as f64;
                if !net.is_finite() {
                    return Err(Error::Unstable {
                        what: "stochastic recursion (iterates diverged)",
                        rho: f64::INFINITY,
                    });
                }
                acc.net_sum[i] += net;
                acc.net_sumsq[i] += net * net;
                if i >= start {
                    steady += net;
                }
            }
            acc.steady_runs.push(steady / window);
            for k in 0..n {
                acc.steady_node_sum[k] += steady_node[k] / window;
            }
        }
        Ok(acc)
    };

    let chunks = runs.div_ceil(RUNS_PER_CHUNK);
    let parts: Vec<Result<Accumulator>> = (0..chunks).into_par_iter().map(one_chunk).collect();
    let mut total = Accumulator::new(horizon, n);
    for p in parts {
        total.merge(p?);
    }

    let r = runs as f64;
    let network_mse = total.net_sum.iter().map(|s| s / r).collect();
    let network_sem = (0..horizon).map(|i| sem(total.net_sum[i], total.net_sumsq[i], runs)).collect();
    let node_mse = (0..horizon).map(|i| (0..n).map(|k| total.node_sum[i * n + k] / r).collect()).collect();
    let node_sem = (0..horizon)
        .map(|i| (0..n).map(|k| sem(total.node_sum[i * n + k], total.node_sumsq[i * n + k], runs)).collect())
        .collect();
    let ss_sum: f64 = total.steady_runs.iter().sum();
    let ss_sumsq: f64 = total.steady_runs.iter().map(|v| v * v).sum();
    Ok(LearningCurve {
        strategy: config.name().to_string(),
        runs,
        network_mse,
        network_sem,
        node_mse,
        node_sem,
        steady_state_start: start,
        steady_state_mse: ss_sum / r,
        steady_state_se: sem(ss_sum, ss_sumsq, runs),
        steady_state_node_mse: total.steady_node_sum.iter().map(|s| s / r).collect(),
    })
}

/// Noise-free limit of any variant, by iterating its step with true gradients.
pub fn noise_free_limit<T: Real>(
    config: &StrategyConfig<T>,
    costs: &[SharedCost<T>],
    x0: &BlockVector<T>,
    tol: T,
    max_iters: usize,
) -> Result<(BlockVector<T>, usize)> {
    let (x, iters, _) = crate::operators::iterate_to_fixed_point(x0, tol, max_iters, |x| config.step(x, costs, None))?;
    Ok((x, iters))
}

/// Minimizer `w^o` of `Σ_l J_l`.
///
/// All-quadratic networks are solved directly from `(Σ q_l) w = Σ b_l`.
/// Otherwise damped Newton steps with Armijo backtracking run until
/// `‖Σ ∇J_l(w)‖ < tol`; when rounding stalls the value test near the
/// optimum, a step is also accepted if it shrinks the gradient norm.
pub fn solve_reference_optimum<T: Real>(costs: &[SharedCost<T>], tol: f64) -> Result<DVector<T>> {
    let m = check_network(costs, costs.len())?;
    if let Some(quads) = costs.iter().map(|c| c.as_quadratic()).collect::<Option<Vec<_>>>() {
        let mut q = DMatrix::zeros(m, m);
        let mut b = DVector::zeros(m);
        for c in quads {
            q += c.q();
            b += c.b();
        }
        return solve(&q, &b);
    }
    let tol = T::lit(tol).max(tolerance::<T>(0.0) * T::of_usize(costs.len()));
    let total_value = |w: &DVector<T>| costs.iter().fold(T::zero(), |s, c| s + c.value(w));
    let total_grad = |w: &DVector<T>| costs.iter().fold(DVector::zeros(m), |s, c| s + c.gradient(w));
    let total_hess = |w: &DVector<T>| costs.iter().fold(DMatrix::zeros(m, m), |s, c| s + c.hessian(w));

    let mut w = DVector::zeros(m);
    let mut g = total_grad(&w);
    let max_iters = 500;
    for _ in 0..max_iters {
        let gnorm = g.norm();
        if gnorm < tol {
            return Ok(w);
        }
        let d = solve(&total_hess(&w), &(-&g))?;
        let f0 = total_value(&w);
        let slope = g.dot(&d);
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..80 {
            let trial = &w + &d * t;
            let ft = total_value(&trial);
            let gt = total_grad(&trial);
            if ft <= f0 + T::lit(1e-4) * t * slope || gt.norm() < gnorm {
                w = trial;
                g = gt;
                accepted = true;
                break;
            }
            t *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "reference optimum (aggregate cost may not be strongly convex)",
        iterations: max_iters,
        residual: g.norm().as_f64(),
    })
}
