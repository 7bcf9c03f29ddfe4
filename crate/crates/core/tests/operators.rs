mod common;

use common::*;
use consensus_core::disagreement::{
    adjoint_residual, apply, apply_adjoint, disagreement_l1, penalty_subgradient, penalty_value, row_residual,
};
use consensus_core::network::{metropolis_weights, Graph, NetworkModel};
use consensus_core::Stacked;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn blockwise_operators_match_dense_kronecker() {
    let mut rng = rng(11);
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=5);
        let g = random_connected_graph(&mut rng, n);
        let w = metropolis_weights(&g);
        let z = dense_z(&w, m);
        let x = random_stacked(&mut rng, n, m, 2.0);
        let y = random_stacked(&mut rng, n, m, 1.0);

        let zx = &z * to_vec(&x);
        let zty = z.transpose() * to_vec(&y);
        for i in 0..n {
            assert!(max_abs_diff(&row_residual(&x, &w, i), &zx.as_slice()[i * m..(i + 1) * m]) < 1e-12);
            assert!(max_abs_diff(&adjoint_residual(&y, &w, i), &zty.as_slice()[i * m..(i + 1) * m]) < 1e-12);
        }
        let signs = zx.map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 });
        let dense_sub = z.transpose() * signs;
        assert!(max_abs_diff(penalty_subgradient(&x, &w).as_slice(), dense_sub.as_slice()) < 1e-12);
        assert!((disagreement_l1(&x, &w) - zx.lp_norm(1)).abs() < 1e-12);

        let lhs = apply(&x, &w).dot(&y);
        let rhs = x.dot(&apply_adjoint(&y, &w));
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}

#[test]
fn penalty_value_examples() {
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let w = metropolis_weights(&g);
    let x = Stacked::from_flat(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
    assert!((penalty_value(&x, &w, 3.0) - 2.0).abs() < 1e-14);
    assert_eq!(penalty_value(&x, &w, 0.0), 0.0);
    assert_eq!(penalty_value(&Stacked::consensual(3, &[4.0]), &w, 5.0), 0.0);
}

#[test]
fn operator_norm_is_one_minus_lambda_n() {
    let mut rng = rng(5);
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let net = NetworkModel::new(random_connected_graph(&mut rng, n)).unwrap();
        let z = dense_z(&net.mixing, 2);
        let sigma_max = z.singular_values().max();
        assert!((sigma_max - net.spectral.kappa_z).abs() < 1e-8, "{sigma_max} vs {}", net.spectral.kappa_z);
    }
}

proptest! {
    #[test]
    fn consensual_vectors_are_in_the_nullspace(seed in any::<u64>(), v in prop::collection::vec(-10.0f64..10.0, 1..5)) {
        let mut rng = rng(seed);
        let n = rng.random_range(2..=8);
        let w = metropolis_weights(&random_connected_graph(&mut rng, n));
        let x = Stacked::consensual(n, &v);
        for i in 0..n {
            prop_assert!(row_residual(&x, &w, i).iter().all(|u| u.abs() < 1e-12));
        }
    }

    #[test]
    fn disagreement_detects_any_split(seed in any::<u64>(), bump in 1e-3f64..1.0) {
        let mut rng = rng(seed);
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=4);
        let w = metropolis_weights(&random_connected_graph(&mut rng, n));
        let base: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut x = Stacked::consensual(n, &base);
        let agent = rng.random_range(0..n);
        let coord = rng.random_range(0..m);
        x.block_mut(agent)[coord] += bump;
        prop_assert!(disagreement_l1(&x, &w) > 0.0);
    }

    #[test]
    fn self_adjoint_on_random_pairs(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=5);
        let w = metropolis_weights(&random_connected_graph(&mut rng, n));
        let x = random_stacked(&mut rng, n, m, 3.0);
        let y = random_stacked(&mut rng, n, m, 3.0);
        let lhs = apply(&x, &w).dot(&y);
        let rhs = x.dot(&apply(&y, &w));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}

#[test]
fn dense_oracle_sanity() {
    // Path-3 Metropolis weights, x = (1, 2, 3).
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let z = dense_z(&metropolis_weights(&g), 1);
    let u = z * DVector::from_vec(vec![1.0, 2.0, 3.0]);
    assert!(max_abs_diff(u.as_slice(), &[-1.0 / 3.0, 0.0, 1.0 / 3.0]) < 1e-15);
}
