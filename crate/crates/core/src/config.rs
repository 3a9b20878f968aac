//! Experiment configuration: a TOML document describing the network, the
//! combination matrices, the costs, step sizes and simulation settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costs::{default_barrier, BarrierFunction, FinanceCost, FinanceRole, QuadraticCost, RoleKind, SharedCost};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::strategies::{run_rng, StrategyConfig, Variant};
use crate::topology::{
    build_random_geometric, identity_matrix, metropolis_matrix, uniform_neighborhood_matrix, CombinationSet, NetworkTopology,
    StepSizeProfile,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub combination: CombinationConfig,
    #[serde(default)]
    pub costs: CostsConfig,
    #[serde(default)]
    pub step_sizes: StepSizeConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyBuilder {
    RandomGeometric,
    Complete,
    Edges,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub builder: TopologyBuilder,
    pub n_nodes: usize,
    /// Connection radius in the unit square.
    pub radius: f64,
    pub seed: u64,
    /// Undirected edges for the `edges` builder.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[usize; 2]>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            builder: TopologyBuilder::RandomGeometric,
            n_nodes: 10,
            radius: 0.6,
            seed: 1,
            edges: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixBuilder {
    Metropolis,
    Uniform,
    Identity,
}

/// `a` is the combination matrix of ATC, CTA and consensus; the general
/// strategy uses `(a1, c, a2)`. `c` is also the gradient-sharing matrix for
/// ATC and CTA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinationConfig {
    pub a: MatrixBuilder,
    pub a1: MatrixBuilder,
    pub a2: MatrixBuilder,
    pub c: MatrixBuilder,
}

impl Default for CombinationConfig {
    fn default() -> Self {
        Self {
            a: MatrixBuilder::Metropolis,
            a1: MatrixBuilder::Identity,
            a2: MatrixBuilder::Metropolis,
            c: MatrixBuilder::Identity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFamily {
    Finance,
    Quadratic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsConfig {
    pub family: CostFamily,
    /// Decision dimension `M`.
    pub dim: usize,
    #[serde(default)]
    pub finance: FinanceConfig,
    #[serde(default)]
    pub quadratic: QuadraticConfig,
}

impl Default for CostsConfig {
    fn default() -> Self {
        Self {
            family: CostFamily::Finance,
            dim: 5,
            finance: FinanceConfig::default(),
            quadratic: QuadraticConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxConfig {
    pub h: Vec<f64>,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinanceConfig {
    /// `|U|, |S|, |H|, |K|`; nodes are assigned in that order unless
    /// `roles` lists them explicitly or `role_seed` shuffles them.
    pub subset_sizes: [usize; 4],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roles: Vec<RoleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_seed: Option<u64>,
    /// Every entry of `p̄`.
    pub return_mean: f64,
    /// `R_p = return_variance · I`.
    pub return_variance: f64,
    /// One entry per `H` node.
    pub tax: Vec<TaxConfig>,
    pub budget: f64,
    pub barrier_t: f64,
    pub barrier_rho: f64,
    pub barrier_tau: f64,
    /// Ridge `ε‖w‖²` on `U`, `H` and `K` nodes.
    pub ridge: f64,
    /// Ridge on `S` nodes.
    pub variance_ridge: f64,
    /// Add `Σ_m φ(−w_m)` to every cost.
    pub nonnegativity: bool,
}

impl Default for FinanceConfig {
    fn default() -> Self {
        Self {
            subset_sizes: [3, 4, 2, 1],
            roles: Vec::new(),
            role_seed: None,
            return_mean: 1.0,
            return_variance: 1.0,
            tax: vec![
                TaxConfig {
                    h: vec![1.0, 2.0, 3.0, 4.0, 5.0],
                    b: 2.0,
                },
                TaxConfig {
                    h: vec![5.0, 4.0, 3.0, 2.0, 1.0],
                    b: 3.0,
                },
            ],
            budget: 5.0,
            barrier_t: 10.0,
            barrier_rho: 0.1,
            barrier_tau: 0.1,
            ridge: 0.05,
            variance_ridge: 0.0,
            nonnegativity: true,
        }
    }
}

/// Node `k` gets `½ s_k ‖w − c_k‖²` with `c_k = center + spread · u_k`,
/// `u_k` uniform in `[−1, 1]^M` drawn from `center_seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticConfig {
    /// One value for all nodes, or one per node.
    pub curvature: Vec<f64>,
    pub center: f64,
    pub spread: f64,
    pub center_seed: u64,
    /// Absolute noise standard deviation per entry.
    pub noise_std: f64,
    /// Relative noise, scaling each gradient entry.
    pub relative_std: f64,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        Self {
            curvature: vec![1.0],
            center: 0.0,
            spread: 1.0,
            center_seed: 7,
            noise_std: 0.1,
            relative_std: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSizeConfig {
    /// Uniform step size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Per-node step sizes; overrides `mu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_node: Option<Vec<f64>>,
    /// Uniform step sizes for `sweep`, ascending.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<f64>,
}

/// `1e-3 … 1e-1`, five points per decade.
pub fn default_sweep() -> Vec<f64> {
    (0..=10).map(|i| 10f64.powf(-3.0 + i as f64 / 5.0)).collect()
}

impl Default for StepSizeConfig {
    fn default() -> Self {
        Self {
            mu: Some(1e-2),
            per_node: None,
            sweep: default_sweep(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Atc,
    Cta,
    General,
    Consensus,
    Centralized,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Atc => "atc",
            StrategyKind::Cta => "cta",
            StrategyKind::General => "general",
            StrategyKind::Consensus => "consensus",
            StrategyKind::Centralized => "centralized",
        }
    }

    /// Strategies covered by the diffusion analysis.
    pub fn is_diffusion(self) -> bool {
        matches!(self, StrategyKind::Atc | StrategyKind::Cta | StrategyKind::General)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub strategies: Vec<StrategyKind>,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub noise: bool,
    pub steady_state_fraction: f64,
    /// Stopping tolerance (block max norm of the step) for noise-free iteration.
    pub fixed_point_tol: f64,
    pub fixed_point_max_iters: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            strategies: vec![StrategyKind::Atc, StrategyKind::Cta, StrategyKind::Consensus, StrategyKind::Centralized],
            horizon: 10_000,
            runs: 200,
            seed: 0,
            noise: true,
            steady_state_fraction: 0.2,
            fixed_point_tol: 1e-15,
            fixed_point_max_iters: 5_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            combination: CombinationConfig::default(),
            costs: CostsConfig::default(),
            step_sizes: StepSizeConfig::default(),
            simulation: SimulationConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the normalized document, so that formatting and comments
    /// in the source file do not change it.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_text()?.as_bytes())))
    }

    /// Structural checks that need no numerics.
    pub fn validate(&self) -> Result<()> {
        let n = self.topology.n_nodes;
        let bad = |msg: String| Err(Error::Config(msg));
        if n == 0 {
            return bad("topology.n_nodes must be positive".into());
        }
        if self.costs.dim == 0 {
            return bad("costs.dim must be positive".into());
        }
        if self.topology.builder == TopologyBuilder::RandomGeometric && !(self.topology.radius > 0.0) {
            return bad(format!("topology.radius must be positive, got {}", self.topology.radius));
        }
        if let Some(e) = self.topology.edges.iter().find(|e| e[0] >= n || e[1] >= n) {
            return bad(format!("edge {:?} refers to a node outside 0..{n}", e));
        }
        match self.costs.family {
            CostFamily::Finance => {
                let f = &self.costs.finance;
                if f.roles.is_empty() {
                    let total: usize = f.subset_sizes.iter().sum();
                    if total != n {
                        return bad(format!("subset sizes {:?} sum to {total}, but the network has {n} nodes", f.subset_sizes));
                    }
                } else if f.roles.len() != n {
                    return bad(format!("{} roles listed for {n} nodes", f.roles.len()));
                }
                let n_tax = self.roles()?.iter().filter(|r| **r == RoleKind::H).count();
                if f.tax.len() != n_tax {
                    return bad(format!("{} tax entries for {n_tax} H nodes", f.tax.len()));
                }
                if let Some(t) = f.tax.iter().find(|t| t.h.len() != self.costs.dim) {
                    return bad(format!("tax vector has length {}, expected {}", t.h.len(), self.costs.dim));
                }
                if !(f.return_variance > 0.0) {
                    return bad("costs.finance.return_variance must be positive".into());
                }
            }
            CostFamily::Quadratic => {
                let q = &self.costs.quadratic;
                if q.curvature.len() != 1 && q.curvature.len() != n {
                    return bad(format!("{} curvatures for {n} nodes", q.curvature.len()));
                }
                if q.curvature.iter().any(|&s| !(s > 0.0)) {
                    return bad("quadratic curvatures must be positive".into());
                }
            }
        }
        if let Some(p) = &self.step_sizes.per_node {
            if p.len() != n {
                return bad(format!("{} per-node step sizes for {n} nodes", p.len()));
            }
            if p.iter().any(|&m| !(m > 0.0)) {
                return bad("step sizes must be positive".into());
            }
        }
        if let Some(m) = self.step_sizes.mu {
            if !(m > 0.0) {
                return bad(format!("step_sizes.mu must be positive, got {m}"));
            }
        }
        let sw = &self.step_sizes.sweep;
        if sw.iter().any(|&m| !(m > 0.0)) || sw.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("step_sizes.sweep must be positive and strictly ascending".into());
        }
        let s = &self.simulation;
        if s.strategies.is_empty() {
            return bad("simulation.strategies is empty".into());
        }
        if s.horizon == 0 || s.runs == 0 {
            return bad("simulation.horizon and simulation.runs must be positive".into());
        }
        if !(s.steady_state_fraction > 0.0 && s.steady_state_fraction <= 1.0) {
            return bad("simulation.steady_state_fraction must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Role of every node for the finance family.
    pub fn roles(&self) -> Result<Vec<RoleKind>> {
        let f = &self.costs.finance;
        if !f.roles.is_empty() {
            return Ok(f.roles.clone());
        }
        let kinds = [RoleKind::U, RoleKind::S, RoleKind::H, RoleKind::K];
        let mut roles: Vec<RoleKind> = kinds.iter().zip(f.subset_sizes).flat_map(|(&k, c)| std::iter::repeat_n(k, c)).collect();
        if let Some(seed) = f.role_seed {
            let mut rng = run_rng(seed, 0);
            for i in (1..roles.len()).rev() {
                roles.swap(i, rng.random_range(0..=i));
            }
        }
        Ok(roles)
    }

    /// Step sizes for a single run: per-node list, else uniform `mu`.
    pub fn step_profile<T: Real>(&self) -> Result<StepSizeProfile<T>> {
        let n = self.topology.n_nodes;
        match (&self.step_sizes.per_node, self.step_sizes.mu) {
            (Some(p), _) => StepSizeProfile::new(p.iter().map(|&m| T::lit(m)).collect()),
            (None, Some(m)) => StepSizeProfile::uniform(n, T::lit(m)),
            (None, None) => Err(Error::Config("set step_sizes.mu or step_sizes.per_node".into())),
        }
    }

    pub fn build<T: Real>(&self) -> Result<Experiment<T>> {
        self.validate()?;
        let topology = self.build_topology()?;
        let matrix = |b: MatrixBuilder| -> DMatrix<T> {
            match b {
                MatrixBuilder::Metropolis => metropolis_matrix(&topology),
                MatrixBuilder::Uniform => uniform_neighborhood_matrix(&topology),
                MatrixBuilder::Identity => identity_matrix(topology.n_nodes()),
            }
        };
        let cc = &self.combination;
        let (a, a1, a2, c) = (matrix(cc.a), matrix(cc.a1), matrix(cc.a2), matrix(cc.c));
        let (costs, labels) = self.build_costs()?;
        Ok(Experiment {
            topology,
            a,
            a1,
            a2,
            c,
            costs,
            labels,
        })
    }

    fn build_topology(&self) -> Result<NetworkTopology> {
        let t = &self.topology;
        match t.builder {
            TopologyBuilder::RandomGeometric => build_random_geometric(t.n_nodes, t.radius, t.seed),
            TopologyBuilder::Complete => NetworkTopology::complete(t.n_nodes),
            TopologyBuilder::Edges => {
                let edges: Vec<(usize, usize)> = t.edges.iter().map(|e| (e[0], e[1])).collect();
                NetworkTopology::from_edges(t.n_nodes, &edges)
            }
        }
    }

    fn build_costs<T: Real>(&self) -> Result<(Vec<SharedCost<T>>, Vec<String>)> {
        let n = self.topology.n_nodes;
        let m = self.costs.dim;
        match self.costs.family {
            CostFamily::Finance => {
                let f = &self.costs.finance;
                let barrier: Arc<dyn BarrierFunction<T>> =
                    Arc::new(default_barrier(T::lit(f.barrier_t), T::lit(f.barrier_rho), T::lit(f.barrier_tau))?);
                let mut tax = f.tax.iter();
                let mut costs: Vec<SharedCost<T>> = Vec::with_capacity(n);
                let mut labels = Vec::with_capacity(n);
                for role in self.roles()? {
                    let (spec, ridge) = match role {
                        RoleKind::U => (FinanceRole::ExpectedReturn { p_bar: DVector::from_element(m, T::lit(f.return_mean)) }, f.ridge),
                        RoleKind::S => (
                            FinanceRole::Variance { r_p: DMatrix::identity(m, m) * T::lit(f.return_variance) },
                            f.variance_ridge,
                        ),
                        RoleKind::H => {
                            let t = tax.next().ok_or_else(|| Error::Config("missing tax entry".into()))?;
                            (
                                FinanceRole::Tax {
                                    h: DVector::from_iterator(m, t.h.iter().map(|&x| T::lit(x))),
                                    b: T::lit(t.b),
                                },
                                f.ridge,
                            )
                        }
                        RoleKind::K => (FinanceRole::Budget { b0: T::lit(f.budget) }, f.ridge),
                    };
                    let mut cost = FinanceCost::new(spec, m, barrier.clone(), T::lit(ridge))?;
                    if !f.nonnegativity {
                        cost = cost.without_nonnegativity();
                    }
                    costs.push(Arc::new(cost));
                    labels.push(role.name().to_string());
                }
                Ok((costs, labels))
            }
            CostFamily::Quadratic => {
                let q = &self.costs.quadratic;
                let mut rng = run_rng(q.center_seed, 0);
                let mut costs: Vec<SharedCost<T>> = Vec::with_capacity(n);
                for k in 0..n {
                    let s = if q.curvature.len() == 1 { q.curvature[0] } else { q.curvature[k] };
                    let center = DVector::from_iterator(m, (0..m).map(|_| T::lit(q.center + q.spread * rng.random_range(-1.0..=1.0))));
                    let base = QuadraticCost::isotropic(center, T::lit(s), T::lit(q.noise_std))?;
                    let cost = QuadraticCost::with_relative_noise(base.q().clone(), base.b().clone(), T::lit(q.noise_std), T::lit(q.relative_std))?;
                    costs.push(Arc::new(cost));
                }
                Ok((costs, vec!["quadratic".to_string(); n]))
            }
        }
    }
}

/// A configuration turned into concrete objects.
#[derive(Clone, Debug)]
pub struct Experiment<T: Real> {
    pub topology: NetworkTopology,
    pub a: DMatrix<T>,
    pub a1: DMatrix<T>,
    pub a2: DMatrix<T>,
    pub c: DMatrix<T>,
    pub costs: Vec<SharedCost<T>>,
    /// Per-node cost label (role name or `quadratic`).
    pub labels: Vec<String>,
}

impl<T: Real> Experiment<T> {
    /// `(A₁, A₂, C)` of a diffusion strategy; `None` for the baselines.
    pub fn combination_set(&self, kind: StrategyKind) -> Option<CombinationSet<T>> {
        match kind {
            StrategyKind::Atc => Some(CombinationSet::new(identity_matrix(self.a.nrows()), self.a.clone(), self.c.clone())),
            StrategyKind::Cta => Some(CombinationSet::new(self.a.clone(), identity_matrix(self.a.nrows()), self.c.clone())),
            StrategyKind::General => Some(CombinationSet::new(self.a1.clone(), self.a2.clone(), self.c.clone())),
            StrategyKind::Consensus | StrategyKind::Centralized => None,
        }
    }

    pub fn variant(&self, kind: StrategyKind) -> Variant<T> {
        let same_c = self.c == identity_matrix(self.a.nrows());
        match kind {
            StrategyKind::Atc if same_c => Variant::Atc { a: self.a.clone() },
            StrategyKind::Cta if same_c => Variant::Cta { a: self.a.clone() },
            StrategyKind::Atc | StrategyKind::Cta | StrategyKind::General => {
                let set = self.combination_set(kind).expect("diffusion strategy");
                Variant::General {
                    a1: set.a1,
                    c: set.c,
                    a2: set.a2,
                }
            }
            StrategyKind::Consensus => Variant::Consensus { a: self.a.clone() },
            StrategyKind::Centralized => Variant::Centralized,
        }
    }

    pub fn strategy_config(&self, kind: StrategyKind, mu: StepSizeProfile<T>, sim: &SimulationConfig) -> StrategyConfig<T> {
        let mut cfg = StrategyConfig::new(self.variant(kind), mu);
        cfg.horizon = sim.horizon;
        cfg.monte_carlo_runs = sim.runs;
        cfg.seed = sim.seed;
        cfg.noise = sim.noise;
        cfg.steady_state_fraction = sim.steady_state_fraction;
        cfg
    }
}

/// Role counts of a role list, keyed by role name.
pub fn role_counts(roles: &[RoleKind]) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for r in roles {
        *out.entry(r.name()).or_insert(0) += 1;
    }
    out
}
