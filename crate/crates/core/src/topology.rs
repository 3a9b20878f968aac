//! Network graphs and the combination matrices `(A1, A2, C)` that drive
//! every diffusion strategy.
//!
//! Matrix convention: entry `(l, k)` is the weight node `k` assigns to
//! information from node `l`. `A1` and `A2` are left-stochastic (columns sum
//! to one), `C` is right-stochastic (rows sum to one), and every weight is
//! zero outside the neighborhood `N_k`, which always contains `k` itself.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{tolerance, Real};

/// Default number of redraws before a random geometric graph gives up.
pub const DEFAULT_CONNECT_ATTEMPTS: usize = 1000;

/// Absolute tolerance on stochasticity and sparsity checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Undirected connected graph with self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    n: usize,
    adjacency: Vec<bool>,
    neighborhoods: Vec<Vec<usize>>,
    positions: Option<Vec<[f64; 2]>>,
}

impl NetworkTopology {
    /// Builds a topology from an undirected edge list. Self-loops are implied.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("a network needs at least one node".into()));
        }
        let mut adjacency = vec![false; n * n];
        for k in 0..n {
            adjacency[k * n + k] = true;
        }
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            adjacency[a * n + b] = true;
            adjacency[b * n + a] = true;
        }
        let topo = Self::from_adjacency(n, adjacency, None);
        if !topo.is_connected() {
            return Err(Error::Disconnected(format!(
                "{} components over {n} nodes",
                topo.component_count()
            )));
        }
        Ok(topo)
    }

    fn from_adjacency(n: usize, adjacency: Vec<bool>, positions: Option<Vec<[f64; 2]>>) -> Self {
        let neighborhoods = (0..n)
            .map(|k| (0..n).filter(|&l| adjacency[l * n + k]).collect())
            .collect();
        Self {
            n,
            adjacency,
            neighborhoods,
            positions,
        }
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        Self::from_edges(n, &edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// `l ∈ N_k`.
    pub fn is_neighbor(&self, l: usize, k: usize) -> bool {
        self.adjacency[l * self.n + k]
    }

    /// Neighborhood of `k`, including `k`, in ascending order.
    pub fn neighborhood(&self, k: usize) -> &[usize] {
        &self.neighborhoods[k]
    }

    /// `|N_k|`, counting the self-loop.
    pub fn degree(&self, k: usize) -> usize {
        self.neighborhoods[k].len()
    }

    /// Node coordinates when the graph came from a geometric builder.
    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// Undirected edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.is_neighbor(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn component_count(&self) -> usize {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = count;
            while let Some(k) = stack.pop() {
                for &l in &self.neighborhoods[k] {
                    if label[l] == usize::MAX {
                        label[l] = count;
                        stack.push(l);
                    }
                }
            }
            count += 1;
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }
}

/// Random geometric graph in the unit square, redrawn until connected.
///
/// Nodes are placed uniformly; `l` and `k` are linked iff their distance is
/// at most `radius`. Draws come from a ChaCha8 stream seeded with `seed`, so
/// the result is a pure function of `(n, radius, seed)`.
pub fn build_random_geometric(n: usize, radius: f64, seed: u64) -> Result<NetworkTopology> {
    build_random_geometric_with_attempts(n, radius, seed, DEFAULT_CONNECT_ATTEMPTS)
}

pub fn build_random_geometric_with_attempts(
    n: usize,
    radius: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<NetworkTopology> {
    if n == 0 {
        return Err(Error::InvalidParameter("node count must be positive".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_attempts {
        let pos: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let mut adjacency = vec![false; n * n];
        for a in 0..n {
            for b in 0..n {
                let dx = pos[a][0] - pos[b][0];
                let dy = pos[a][1] - pos[b][1];
                adjacency[a * n + b] = a == b || (dx * dx + dy * dy).sqrt() <= radius;
            }
        }
        let topo = NetworkTopology::from_adjacency(n, adjacency, Some(pos));
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(Error::Disconnected(format!(
        "no connected draw in {max_attempts} attempts with radius {radius}; the radius is too small"
    )))
}

/// Metropolis weights: `1 / max(|N_k|, |N_l|)` off the diagonal, with the
/// residual mass on the diagonal. Symmetric, hence doubly stochastic.
pub fn metropolis_matrix<T: Real>(topology: &NetworkTopology) -> DMatrix<T> {
    let n = topology.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut off = T::zero();
        for &l in topology.neighborhood(k) {
            if l != k {
                let w = T::one() / T::of_usize(topology.degree(k).max(topology.degree(l)));
                a[(l, k)] = w;
                off += w;
            }
        }
        a[(k, k)] = T::one() - off;
    }
    a
}

pub fn identity_matrix<T: Real>(n: usize) -> DMatrix<T> {
    DMatrix::identity(n, n)
}

/// Column `k` spreads `1/|N_k|` over `N_k`. Left-stochastic.
pub fn uniform_neighborhood_matrix<T: Real>(topology: &NetworkTopology) -> DMatrix<T> {
    let n = topology.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    for k in 0..n {
        let w = T::one() / T::of_usize(topology.degree(k));
        for &l in topology.neighborhood(k) {
            a[(l, k)] = w;
        }
    }
    a
}

/// The triple `(A1, A2, C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinationSet<T: Real> {
    pub a1: DMatrix<T>,
    pub a2: DMatrix<T>,
    pub c: DMatrix<T>,
}

impl<T: Real> CombinationSet<T> {
    pub fn new(a1: DMatrix<T>, a2: DMatrix<T>, c: DMatrix<T>) -> Self {
        Self { a1, a2, c }
    }

    /// `(I, A, I)`.
    pub fn atc(a: DMatrix<T>) -> Self {
        let n = a.nrows();
        Self::new(DMatrix::identity(n, n), a, DMatrix::identity(n, n))
    }

    /// `(A, I, I)`.
    pub fn cta(a: DMatrix<T>) -> Self {
        let n = a.nrows();
        Self::new(a, DMatrix::identity(n, n), DMatrix::identity(n, n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixRole {
    A1,
    A2,
    C,
}

impl fmt::Display for MatrixRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixRole::A1 => "A1",
            MatrixRole::A2 => "A2",
            MatrixRole::C => "C",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    Shape { rows: usize, cols: usize },
    Negative { row: usize, col: usize, value: f64 },
    ColumnSum { col: usize, sum: f64 },
    RowSum { row: usize, sum: f64 },
    Sparsity { row: usize, col: usize, value: f64 },
}

/// One failed invariant of a [`CombinationSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub matrix: MatrixRole,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Shape { rows, cols } => write!(f, "{}: shape {rows}x{cols} does not match the network", self.matrix),
            ViolationKind::Negative { row, col, value } => {
                write!(f, "{}: negative entry ({row}, {col}) = {value}", self.matrix)
            }
            ViolationKind::ColumnSum { col, sum } => write!(f, "{}: column {col} sum {sum} ≠ 1", self.matrix),
            ViolationKind::RowSum { row, sum } => write!(f, "{}: row {row} sum {sum} ≠ 1", self.matrix),
            ViolationKind::Sparsity { row, col, value } => write!(
                f,
                "{}: sparsity, entry ({row}, {col}) = {value} but node {row} is not a neighbor of node {col}",
                self.matrix
            ),
        }
    }
}

fn check_matrix<T: Real>(
    m: &DMatrix<T>,
    role: MatrixRole,
    column_stochastic: bool,
    topology: &NetworkTopology,
    out: &mut Vec<Violation>,
) {
    let n = topology.n_nodes();
    if m.nrows() != n || m.ncols() != n {
        out.push(Violation {
            matrix: role,
            kind: ViolationKind::Shape { rows: m.nrows(), cols: m.ncols() },
        });
        return;
    }
    let tol = STOCHASTIC_TOL.max(tolerance::<T>(STOCHASTIC_TOL).as_f64() * n as f64);
    for l in 0..n {
        for k in 0..n {
            let v = m[(l, k)].as_f64();
            if v < 0.0 {
                out.push(Violation { matrix: role, kind: ViolationKind::Negative { row: l, col: k, value: v } });
            }
            if v != 0.0 && !topology.is_neighbor(l, k) {
                out.push(Violation { matrix: role, kind: ViolationKind::Sparsity { row: l, col: k, value: v } });
            }
        }
    }
    for i in 0..n {
        if column_stochastic {
            let sum: f64 = m.column(i).iter().map(|v| v.as_f64()).sum();
            if (sum - 1.0).abs() > tol {
                out.push(Violation { matrix: role, kind: ViolationKind::ColumnSum { col: i, sum } });
            }
        } else {
            let sum: f64 = m.row(i).iter().map(|v| v.as_f64()).sum();
            if (sum - 1.0).abs() > tol {
                out.push(Violation { matrix: role, kind: ViolationKind::RowSum { row: i, sum } });
            }
        }
    }
}

/// Every violated invariant of `set` on `topology`; empty iff valid.
pub fn validate_combination_set<T: Real>(set: &CombinationSet<T>, topology: &NetworkTopology) -> Vec<Violation> {
    let mut out = Vec::new();
    check_matrix(&set.a1, MatrixRole::A1, true, topology, &mut out);
    check_matrix(&set.a2, MatrixRole::A2, true, topology, &mut out);
    check_matrix(&set.c, MatrixRole::C, false, topology, &mut out);
    out
}

fn bool_product(a: &[bool], b: &[bool], n: usize) -> Vec<bool> {
    let mut out = vec![false; n * n];
    for i in 0..n {
        for k in 0..n {
            if a[i * n + k] {
                for j in 0..n {
                    out[i * n + j] |= b[k * n + j];
                }
            }
        }
    }
    out
}

/// True iff some power of `p` is entrywise positive (primitivity).
///
/// Checks the single power `p^m` with `m = N² − 2N + 2` (Wielandt's bound) on
/// the zero pattern, so no floating-point underflow can hide a positive entry.
pub fn is_regular<T: Real>(p: &DMatrix<T>) -> bool {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return false;
    }
    let pattern: Vec<bool> = (0..n * n).map(|idx| p[(idx / n, idx % n)] > T::zero()).collect();
    let mut exp = n * n + 2 - 2 * n;
    let mut result: Option<Vec<bool>> = None;
    let mut base = pattern;
    while exp > 0 {
        if exp & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => bool_product(&r, &base, n),
            });
        }
        exp >>= 1;
        if exp > 0 {
            base = bool_product(&base, &base, n);
        }
    }
    result.map(|r| r.iter().all(|&b| b)).unwrap_or(false)
}

/// Left eigenvector `θ` of a regular right-stochastic `p` for eigenvalue one,
/// normalized to `θ^T 1 = 1`. Power iteration on `p^T`.
pub fn left_perron_vector<T: Real>(p: &DMatrix<T>) -> Result<DVector<T>> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::Dimension(format!("perron vector of a {}x{} matrix", p.nrows(), p.ncols())));
    }
    let tol = tolerance::<T>(1e-13);
    let pt = p.transpose();
    let mut theta = DVector::from_element(n, T::one() / T::of_usize(n));
    let max_iters = 100_000;
    let mut diff = T::zero();
    for _ in 0..max_iters {
        let mut next = &pt * &theta;
        let s = next.sum();
        next /= s;
        diff = (&next - &theta).amax();
        theta = next;
        if diff < tol {
            return Ok(theta);
        }
    }
    Err(Error::NoConvergence {
        what: "left Perron vector power iteration",
        iterations: max_iters,
        residual: diff.as_f64(),
    })
}

/// Positive step sizes `μ_k`, one per node.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSizeProfile<T: Real> {
    mu: Vec<T>,
}

impl<T: Real> StepSizeProfile<T> {
    pub fn new(mu: Vec<T>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidParameter("step-size profile is empty".into()));
        }
        if let Some((k, v)) = mu.iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
            return Err(Error::InvalidParameter(format!("step size at node {k} must be positive, got {v}")));
        }
        Ok(Self { mu })
    }

    pub fn uniform(n: usize, mu: T) -> Result<Self> {
        Self::new(vec![mu; n])
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.mu
    }

    pub fn get(&self, k: usize) -> T {
        self.mu[k]
    }

    pub fn mu_max(&self) -> T {
        self.mu.iter().copied().fold(T::zero(), |m, v| m.max(v))
    }

    pub fn mu_min(&self) -> T {
        self.mu.iter().copied().fold(self.mu[0], |m, v| m.min(v))
    }

    /// `β_k = μ_k / μ_max`.
    pub fn beta(&self, k: usize) -> T {
        self.mu[k] / self.mu_max()
    }

    /// `μ_min / μ_max`.
    pub fn beta_min(&self) -> T {
        self.mu_min() / self.mu_max()
    }

    /// `Ω = diag{μ_1, …, μ_N}`.
    pub fn omega(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.mu))
    }

    /// `Ω ⊗ I_M`.
    pub fn lifted(&self, m: usize) -> DMatrix<T> {
        crate::linalg::lift(&self.omega(), m)
    }
}

/// Plain-text form of a topology and any matrices defined on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub n_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    /// Dense row-major matrices keyed by name.
    #[serde(default)]
    pub matrices: BTreeMap<String, Vec<Vec<f64>>>,
}

impl TopologyDocument {
    pub fn new(topology: &NetworkTopology) -> Self {
        Self {
            n_nodes: topology.n_nodes(),
            edges: topology.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            positions: topology.positions().map(|p| p.to_vec()),
            matrices: BTreeMap::new(),
        }
    }

    pub fn with_matrix<T: Real>(mut self, name: &str, m: &DMatrix<T>) -> Self {
        let rows = m.row_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
        self.matrices.insert(name.to_string(), rows);
        self
    }

    pub fn topology(&self) -> Result<NetworkTopology> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut topo = NetworkTopology::from_edges(self.n_nodes, &edges)?;
        topo.positions = self.positions.clone();
        Ok(topo)
    }

    pub fn matrix<T: Real>(&self, name: &str) -> Result<DMatrix<T>> {
        let rows = self
            .matrices
            .get(name)
            .ok_or_else(|| Error::Config(format!("matrix `{name}` missing from topology document")))?;
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension(format!("matrix `{name}` has ragged rows")));
        }
        Ok(DMatrix::from_fn(n, m, |i, j| T::lit(rows[i][j])))
    }

    pub fn to_text(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn path3() -> NetworkTopology {
        NetworkTopology::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn single_node_neighborhood_is_itself() {
        let t = build_random_geometric(1, 0.1, 3).unwrap();
        assert_eq!(t.neighborhood(0), &[0]);
        let a: DMatrix<f64> = metropolis_matrix(&t);
        assert_eq!(a, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn large_radius_gives_complete_graph() {
        let t = build_random_geometric(5, 2.0, 7).unwrap();
        for k in 0..5 {
            assert_eq!(t.degree(k), 5);
        }
    }

    #[test]
    fn ten_node_network_connects_and_is_deterministic() {
        let a = build_random_geometric(10, 0.6, 1).unwrap();
        let b = build_random_geometric(10, 0.6, 1).unwrap();
        assert!(a.is_connected());
        assert_eq!(a, b);
        assert_eq!(a.n_nodes(), 10);
    }

    #[test]
    fn tiny_radius_exhausts_attempts() {
        let err = build_random_geometric_with_attempts(10, 1e-6, 1, 20).unwrap_err();
        assert!(matches!(err, Error::Disconnected(_)));
    }

    #[test]
    fn explicit_disconnected_edges_are_rejected() {
        assert!(matches!(
            NetworkTopology::from_edges(4, &[(0, 1), (2, 3)]),
            Err(Error::Disconnected(_))
        ));
    }

    #[test]
    fn metropolis_two_nodes() {
        let t = NetworkTopology::complete(2).unwrap();
        let a: DMatrix<f64> = metropolis_matrix(&t);
        assert_eq!(a, DMatrix::from_element(2, 2, 0.5));
    }

    #[test]
    fn metropolis_path_by_hand() {
        // degrees with self-loops: 2, 3, 2
        let a: DMatrix<f64> = metropolis_matrix(&path3());
        assert_relative_eq!(a[(0, 1)], 1.0 / 3.0);
        assert_relative_eq!(a[(0, 0)], 2.0 / 3.0);
        assert_relative_eq!(a[(1, 1)], 1.0 / 3.0);
        assert_eq!(a[(0, 2)], 0.0);
        for k in 0..3 {
            assert_relative_eq!(a.column(k).sum(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn uniform_neighborhood_builders() {
        let t = NetworkTopology::complete(2).unwrap();
        let u: DMatrix<f64> = uniform_neighborhood_matrix(&t);
        assert_eq!(u, DMatrix::from_element(2, 2, 0.5));

        // star centered at node 1
        let star = NetworkTopology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let u: DMatrix<f64> = uniform_neighborhood_matrix(&star);
        for l in 0..3 {
            assert_relative_eq!(u[(l, 1)], 1.0 / 3.0);
        }
        assert_eq!(identity_matrix::<f64>(3), DMatrix::identity(3, 3));
    }

    #[test]
    fn builders_pass_validation() {
        let t = build_random_geometric(8, 0.6, 11).unwrap();
        let a: DMatrix<f64> = metropolis_matrix(&t);
        let set = CombinationSet::new(a.clone(), a.clone(), identity_matrix(8));
        assert!(validate_combination_set(&set, &t).is_empty());
        let u = uniform_neighborhood_matrix(&t);
        let set = CombinationSet::new(u.clone(), u.clone(), a.transpose());
        assert!(validate_combination_set(&set, &t).is_empty());
    }

    #[test]
    fn validation_names_bad_column_and_sparsity() {
        let t = path3();
        let mut a1: DMatrix<f64> = metropolis_matrix(&t);
        a1[(1, 2)] -= 0.1; // column 2 now sums to 0.9
        let mut c = identity_matrix::<f64>(3);
        c[(0, 2)] = 0.5;
        c[(0, 0)] = 0.5;
        let set = CombinationSet::new(a1, metropolis_matrix(&t), c);
        let v = validate_combination_set(&set, &t);
        assert!(v.iter().any(|x| x.matrix == MatrixRole::A1 && matches!(x.kind, ViolationKind::ColumnSum { col: 2, .. })));
        assert!(v.iter().any(|x| x.matrix == MatrixRole::C && matches!(x.kind, ViolationKind::Sparsity { row: 0, col: 2, .. })));
        let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n");
        assert!(text.contains("column 2 sum"));
        assert!(text.contains("sparsity"));
    }

    #[test]
    fn regularity_examples() {
        assert!(is_regular(&DMatrix::from_element(2, 2, 0.5f64)));
        assert!(!is_regular(&DMatrix::<f64>::identity(3, 3)));
        assert!(!is_regular(&DMatrix::from_row_slice(2, 2, &[0.0f64, 1.0, 1.0, 0.0])));
        assert!(is_regular(&DMatrix::from_element(1, 1, 1.0f64)));
        // path with self-loops is primitive
        let a: DMatrix<f64> = metropolis_matrix(&path3());
        assert!(is_regular(&a.transpose()));
    }

    #[test]
    fn perron_vector_examples() {
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.5, 0.5]);
        let theta = left_perron_vector(&p).unwrap();
        assert_relative_eq!(theta[0], 5.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(theta[1], 1.0 / 6.0, epsilon = 1e-12);
        let residual = (p.transpose() * &theta - &theta).amax();
        assert!(residual < 1e-12);

        let t = build_random_geometric(6, 0.7, 5).unwrap();
        let a: DMatrix<f64> = metropolis_matrix(&t);
        let theta = left_perron_vector(&(a.transpose() * a.transpose())).unwrap();
        for v in theta.iter() {
            assert_relative_eq!(*v, 1.0 / 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn step_size_profile_derived_quantities() {
        let s = StepSizeProfile::new(vec![0.1, 0.05, 0.2]).unwrap();
        assert_eq!(s.mu_max(), 0.2);
        assert_eq!(s.mu_min(), 0.05);
        assert_eq!(s.beta(1), 0.25);
        assert_eq!(s.omega()[(2, 2)], 0.2);
        assert_eq!(s.lifted(2).nrows(), 6);
        assert!(StepSizeProfile::new(vec![0.1, 0.0]).is_err());
    }

    #[test]
    fn topology_document_round_trip() {
        let t = build_random_geometric(6, 0.6, 2).unwrap();
        let a: DMatrix<f64> = metropolis_matrix(&t);
        let doc = TopologyDocument::new(&t).with_matrix("a", &a);
        let text = doc.to_text().unwrap();
        let back = TopologyDocument::from_text(&text).unwrap();
        assert_eq!(back.topology().unwrap(), t);
        assert_eq!(back.matrix::<f64>("a").unwrap(), a);
    }
}
