mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use pareto_diffusion::costs::{QuadraticCost, SharedCost};
use pareto_diffusion::linalg::{lift, solve};
use pareto_diffusion::operators::{diffuse, find_fixed_point, BlockVector, FixedPointOptions, GradientDescentSpec};
use pareto_diffusion::topology::StepSizeProfile;
use proptest::prelude::*;
use std::sync::Arc;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prop_linearity(seed in any::<u64>()) {
        prop_assert!(linearity(&mut rng(seed)).is_ok(), "{:?}", linearity(&mut rng(seed)));
    }

    #[test]
    fn prop_nonnegativity(seed in any::<u64>()) {
        prop_assert!(nonnegativity(&mut rng(seed)).is_ok());
    }

    #[test]
    fn prop_scaling(seed in any::<u64>()) {
        prop_assert!(scaling(&mut rng(seed)).is_ok(), "{:?}", scaling(&mut rng(seed)));
    }

    #[test]
    fn prop_convexity(seed in any::<u64>()) {
        prop_assert!(convexity(&mut rng(seed)).is_ok(), "{:?}", convexity(&mut rng(seed)));
    }

    #[test]
    fn prop_additivity(seed in any::<u64>()) {
        prop_assert!(additivity(&mut rng(seed)).is_ok(), "{:?}", additivity(&mut rng(seed)));
    }

    #[test]
    fn prop_variance_relations(seed in any::<u64>()) {
        prop_assert!(variance_relations(&mut rng(seed)).is_ok(), "{:?}", variance_relations(&mut rng(seed)));
    }

    #[test]
    fn prop_block_maximum_norm(seed in any::<u64>()) {
        prop_assert!(block_maximum_norm(&mut rng(seed)).is_ok());
    }

    #[test]
    fn prop_preservation(seed in any::<u64>()) {
        prop_assert!(preservation(&mut rng(seed)).is_ok());
    }

    #[test]
    fn prop_contraction(seed in any::<u64>()) {
        prop_assert!(contraction(&mut rng(seed)).is_ok(), "{:?}", contraction(&mut rng(seed)));
    }
}

#[test]
fn fixed_point_matches_linear_solve() {
    // quadratic costs make T_d affine, so w_∞ solves (I − 𝒜₂ᵀ(I − 𝓜𝓗)𝒜₁ᵀ) w = 𝒜₂ᵀ𝓜 b
    let mut r = rng(11);
    let costs = random_quadratics(&mut r, 2, 3, 0.0);
    let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.4, 0.6]);
    let spec = GradientDescentSpec::new(costs.clone(), DMatrix::identity(2, 2), StepSizeProfile::new(vec![0.2, 0.1]).unwrap()).unwrap();
    let fp = find_fixed_point(&DMatrix::identity(2, 2), &spec, &a, &BlockVector::zeros(2, 3), FixedPointOptions::default()).unwrap();

    let mut h = DMatrix::zeros(6, 6);
    let mut b = DVector::zeros(6);
    for (k, c) in costs.iter().enumerate() {
        let q = c.as_quadratic().unwrap();
        h.view_mut((3 * k, 3 * k), (3, 3)).copy_from(q.q());
        b.rows_mut(3 * k, 3).copy_from(q.b());
    }
    let mu = spec.mu().lifted(3);
    let a2t = lift(&a, 3).transpose();
    let lhs = DMatrix::identity(6, 6) - &a2t * (DMatrix::identity(6, 6) - &mu * &h);
    let direct = solve(&lhs, &(&a2t * &mu * b)).unwrap();
    assert!((fp.point.as_vector() - direct).amax() < 1e-10);
}

#[test]
fn fixed_point_is_independent_of_start() {
    let mut r = rng(5);
    let costs = random_quadratics(&mut r, 4, 2, 0.0);
    let c = right_stochastic(&mut r, 4);
    let spec = admissible_spec(&mut r, costs, c);
    let (a1, a2) = (left_stochastic(&mut r, 4), left_stochastic(&mut r, 4));
    let opts = FixedPointOptions::default();
    let p1 = find_fixed_point(&a1, &spec, &a2, &BlockVector::zeros(4, 2), opts).unwrap().point;
    let p2 = find_fixed_point(&a1, &spec, &a2, &random_block(&mut r, 4, 2), opts).unwrap().point;
    assert!((p1.as_vector() - p2.as_vector()).amax() < 10.0 * opts.tol);
    let again = diffuse(&a1, &spec, &a2, &p1).unwrap();
    assert!((again.as_vector() - p1.as_vector()).amax() < opts.tol * (1.0 + spec.sigma_bounds().1.len() as f64));
}

#[test]
fn common_minimizer_is_a_fixed_point() {
    let w_star = DVector::from_vec(vec![0.5, -1.0]);
    let costs: Vec<SharedCost<f64>> = (0..3)
        .map(|k| Arc::new(QuadraticCost::isotropic(w_star.clone(), 1.0 + k as f64, 0.0).unwrap()) as SharedCost<f64>)
        .collect();
    let mut r = rng(2);
    let spec = admissible_spec(&mut r, costs, DMatrix::identity(3, 3));
    let a = left_stochastic(&mut r, 3);
    let fp = find_fixed_point(&DMatrix::identity(3, 3), &spec, &a, &random_block(&mut r, 3, 2), FixedPointOptions::default()).unwrap();
    for k in 0..3 {
        assert!((fp.point.block_owned(k) - &w_star).amax() < 1e-11);
    }
}
