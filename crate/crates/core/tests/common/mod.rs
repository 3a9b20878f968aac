#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pareto_diffusion::costs::{QuadraticCost, SharedCost};
use pareto_diffusion::operators::{block_max_norm, combine, contraction_factor, diffuse, gradient_descent, power, BlockVector, GradientDescentSpec};
use pareto_diffusion::topology::StepSizeProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

pub fn random_block(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BlockVector<f64> {
    let v = DVector::from_fn(n * m, |_, _| 3.0 * normal(rng));
    BlockVector::from_vector(v, n, m).unwrap()
}

/// Positive entries, columns summing to one.
pub fn left_stochastic(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0f64));
    for mut col in a.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    a
}

pub fn right_stochastic(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    left_stochastic(rng, n).transpose()
}

/// Symmetric matrix with eigenvalues drawn from `[lo, hi]`.
pub fn spd(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| normal(rng));
    let q = g.qr().q();
    let d = DVector::from_fn(m, |_, _| rng.random_range(lo..=hi));
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

pub fn random_quadratics(rng: &mut ChaCha8Rng, n: usize, m: usize, noise: f64) -> Vec<SharedCost<f64>> {
    (0..n)
        .map(|_| {
            let q = spd(rng, m, 0.2, 4.0);
            let b = DVector::from_fn(m, |_, _| normal(rng));
            Arc::new(QuadraticCost::new(q, b, noise).unwrap()) as SharedCost<f64>
        })
        .collect()
}

/// Step sizes inside `(0, 2/σ_k,max)`.
pub fn admissible_spec(rng: &mut ChaCha8Rng, costs: Vec<SharedCost<f64>>, c: DMatrix<f64>) -> GradientDescentSpec<f64> {
    let n = costs.len();
    let probe = GradientDescentSpec::new(costs.clone(), c.clone(), StepSizeProfile::uniform(n, 1e-3).unwrap()).unwrap();
    let (_, hi) = probe.sigma_bounds();
    let mu = hi.iter().map(|s| rng.random_range(0.05..0.95) * 2.0 / s).collect();
    GradientDescentSpec::new(costs, c, StepSizeProfile::new(mu).unwrap()).unwrap()
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..=6), rng.random_range(1..=4))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub type Check = fn(&mut ChaCha8Rng) -> Result<(), String>;

/// Linearity of `T_A`, to 1e-13.
pub fn linearity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, m) = dims(rng);
    let a = left_stochastic(rng, n);
    let (x, y) = (random_block(rng, n, m), random_block(rng, n, m));
    let (al, be) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let lhs = combine(&a, &x.scale(al).add(&y.scale(be)).unwrap()).unwrap();
    let rhs = combine(&a, &x).unwrap().scale(al).add(&combine(&a, &y).unwrap().scale(be)).unwrap();
    let err = (lhs.as_vector() - rhs.as_vector()).amax();
    if err <= 1e-13 * (1.0 + rhs.as_vector().amax()) {
        Ok(())
    } else {
        Err(format!("linearity error {err:e}"))
    }
}

pub fn nonnegativity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, m) = dims(rng);
    let p = power(&random_block(rng, n, m));
    if p.iter().all(|&v| v >= 0.0) {
        Ok(())
    } else {
        Err(format!("negative entry in {p}"))
    }
}

pub fn scaling(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, m) = dims(rng);
    let x = random_block(rng, n, m);
    let a = rng.random_range(-5.0..5.0);
    let lhs = power(&x.scale(a));
    let rhs = power(&x) * (a * a);
    match lhs.iter().zip(rhs.iter()).find(|(l, r)| !close(**l, **r, 1e-14)) {
        None => Ok(()),
        Some((l, r)) => Err(format!("P[ax] = {l:e}, a²P[x] = {r:e}")),
    }
}

pub fn convexity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, m) = dims(rng);
    let k = rng.random_range(2..=5);
    let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    let xs: Vec<_> = (0..k).map(|_| random_block(rng, n, m)).collect();
    let mut mix = BlockVector::zeros(n, m);
    let mut bound = DVector::zeros(n);
    for (wi, xi) in w.iter().zip(&xs) {
        mix = mix.add(&xi.scale(*wi)).unwrap();
        bound += power(xi) * *wi;
    }
    let p = power(&mix);
    match (0..n).find(|&i| p[i] > bound[i] + 1e-12 * (1.0 + bound[i])) {
        None => Ok(()),
        Some(i) => Err(format!("block {i}: {:e} > {:e}", p[i], bound[i])),
    }
}

/// Blockwise orthogonal `x`, `y`: `P[x + y] = P[x] + P[y]`.
pub fn additivity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, m) = dims(rng);
    let x = random_block(rng, n, m);
    let mut y = random_block(rng, n, m);
    for k in 0..n {
        let xk = x.block_owned(k);
        let yk = y.block_owned(k);
        let nx = xk.norm_squared();
        let proj = if nx > 0.0 { &yk - &xk * (xk.dot(&yk) / nx) } else { yk };
        y.set_block(k, &proj);
    }
    let lhs = power(&x.add(&y).unwrap());
    let rhs = power(&x) + power(&y);
    match (0..n).find(|&i| !close(lhs[i], rhs[i], 1e-12)) {
        None => Ok(()),
        Some(i) => Err(format!("block {i}: {:e} vs {:e}", lhs[i], rhs[i])),
    }
}

/// `P[T_A(x)] ⪯ Aᵀ P[x]` and `P[T_G(x) − T_G(y)] ⪯ Γ² P[x − y]`.
pub fn variance_relations(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, m) = dims(rng);
    let a = left_stochastic(rng, n);
    let x = random_block(rng, n, m);
    let lhs = power(&combine(&a, &x).unwrap());
    let rhs = a.transpose() * power(&x);
    if let Some(i) = (0..n).find(|&i| lhs[i] > rhs[i] + 1e-12 * (1.0 + rhs[i])) {
        return Err(format!("T_A relation at block {i}: {:e} > {:e}", lhs[i], rhs[i]));
    }
    let costs = random_quadratics(rng, n, m, 0.0);
    let c = if rng.random_bool(0.5) { DMatrix::identity(n, n) } else { right_stochastic(rng, n) };
    let spec = admissible_spec(rng, costs, c);
    let y = random_block(rng, n, m);
    let d = gradient_descent(&spec, &x).unwrap().sub(&gradient_descent(&spec, &y).unwrap()).unwrap();
    let g = contraction_factor(&spec);
    let bound = power(&x.sub(&y).unwrap());
    for k in 0..n {
        let lhs = d.block(k).norm_squared();
        let rhs = g.gamma[k] * g.gamma[k] * bound[k];
        if lhs > rhs + 1e-12 * (1.0 + rhs) {
            return Err(format!("T_G relation at block {k}: {lhs:e} > {rhs:e}"));
        }
    }
    Ok(())
}

pub fn block_maximum_norm(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, m) = dims(rng);
    let x = random_block(rng, n, m);
    let p = power(&x).amax();
    let b = block_max_norm(&x);
    if close(p, b * b, 1e-14) {
        Ok(())
    } else {
        Err(format!("‖P[x]‖_∞ = {p:e}, bmn² = {:e}", b * b))
    }
}

pub fn preservation(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.random_range(1..=8);
    let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..2.0f64));
    let x = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0f64));
    let y = &x + DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0f64));
    let (fx, fy) = (&f * &x, &f * &y);
    match (0..n).find(|&i| fx[i] > fy[i]) {
        None => Ok(()),
        Some(i) => Err(format!("row {i}: {:e} > {:e}", fx[i], fy[i])),
    }
}

/// `‖T_d(x) − T_d(y)‖_{b,∞} ≤ ‖Γ‖_∞ ‖x − y‖_{b,∞}` for admissible step sizes.
pub fn contraction(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, m) = dims(rng);
    let costs = random_quadratics(rng, n, m, 0.0);
    let c = right_stochastic(rng, n);
    let spec = admissible_spec(rng, costs, c);
    let (a1, a2) = (left_stochastic(rng, n), left_stochastic(rng, n));
    let (x, y) = (random_block(rng, n, m), random_block(rng, n, m));
    let lhs = block_max_norm(&diffuse(&a1, &spec, &a2, &x).unwrap().sub(&diffuse(&a1, &spec, &a2, &y).unwrap()).unwrap());
    let rhs = contraction_factor(&spec).norm * block_max_norm(&x.sub(&y).unwrap());
    if lhs <= rhs * (1.0 + 1e-12) + 1e-14 {
        Ok(())
    } else {
        Err(format!("{lhs:e} > {rhs:e}"))
    }
}

pub const OPERATOR_PROPERTIES: [(&str, Check); 8] = [
    ("linearity", linearity),
    ("nonnegativity", nonnegativity),
    ("scaling", scaling),
    ("convexity", convexity),
    ("additivity", additivity),
    ("variance relations", variance_relations),
    ("block maximum norm", block_maximum_norm),
    ("preservation of inequality", preservation),
];

/// Runs `check` on `cases` seeds derived from `base`; first failure wins.
pub fn run_cases(check: Check, base: u64, cases: usize) -> Result<(), String> {
    for i in 0..cases as u64 {
        let seed = base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i);
        check(&mut rng(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(())
}
