#[path = "common/oracles.rs"]
mod oracles;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::Rng;

use gwot_core::{
    apply_a, apply_a_adjoint, energy_constant, gw_energy, gw_gradient, gw_quadratic, lipschitz_bound, Coupling, CostMatrix,
    Marginals,
};
use oracles::*;

fn dense(m: ndarray::ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

#[test]
fn apply_a_hand_examples() {
    let img = apply_a(array![[1.0, 2.0], [3.0, 4.0]].view());
    assert_eq!(img.row_sums, array![3.0, 7.0]);
    assert_eq!(img.col_sums, array![4.0, 6.0]);
    assert_eq!(apply_a(Array2::zeros((2, 2)).view()).to_vec(), vec![0.0; 4]);

    let adj = apply_a_adjoint(array![1.0, 0.0, 0.0, 2.0].view(), 2, 2).unwrap();
    assert_eq!(adj, array![[1.0, 3.0], [0.0, 2.0]]);
    assert!(apply_a_adjoint(array![1.0, 2.0, 3.0].view(), 2, 2).is_err());
}

#[test]
fn product_coupling_is_feasible() {
    let mut r = rng(1);
    let a = random_marginals(4, &mut r);
    let b = random_marginals(6, &mut r);
    let img = apply_a(Coupling::product(&a, &b).view());
    assert!(img.residual(a.view(), b.view()) < 1e-15);
}

#[test]
fn quadratic_and_energy_match_quadruple_sums() {
    let mut r = rng(2);
    for _ in 0..50 {
        let n = r.random_range(1..=6);
        let m = r.random_range(1..=6);
        let symmetric = r.random_bool(0.5);
        let (c1, c2) = (random_cost(n, symmetric, &mut r), random_cost(m, symmetric, &mut r));
        let (a, b) = (random_marginals(n, &mut r), random_marginals(m, &mut r));

        let raw = Coupling::new(random_matrix(n, m, &mut r)).unwrap();
        let q = gw_quadratic(&raw, &c1, &c2).unwrap();
        let oracle = quadratic_quadruple_sum(raw.view(), c1.view(), c2.view());
        assert_relative_eq!(q, oracle, max_relative = 1e-10);

        let pi = random_feasible(&a, &b, &mut r);
        let e = gw_energy(&pi, &c1, &c2, &a, &b).unwrap();
        let oracle = energy_quadruple_sum(pi.view(), c1.view(), c2.view());
        assert_relative_eq!(e, oracle, max_relative = 1e-10, epsilon = 1e-14);
    }
}

#[test]
fn hand_computed_two_by_two_values() {
    let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
    let h = Marginals::uniform(2);
    let diag = Coupling::new(array![[0.5, 0.0], [0.0, 0.5]]).unwrap();
    assert_eq!(gw_quadratic(&diag, &c, &c).unwrap(), -0.5);
    assert_eq!(gw_energy(&diag, &c, &c, &h, &h).unwrap(), 0.0);
    let z = CostMatrix::zeros(2);
    assert_eq!(gw_quadratic(&diag, &z, &c).unwrap(), 0.0);
    assert_eq!(gw_energy(&diag, &z, &z, &h, &h).unwrap(), 0.0);
}

#[test]
fn energy_of_identical_graphs_at_product_coupling() {
    let mut r = rng(3);
    let c = random_cost(5, true, &mut r);
    let h = Marginals::uniform(5);
    let pi = Coupling::product(&h, &h);
    let e = gw_energy(&pi, &c, &c, &h, &h).unwrap();
    assert_relative_eq!(e, energy_quadruple_sum(pi.view(), c.view(), c.view()), max_relative = 1e-12);
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(4);
    for _ in 0..20 {
        let n = r.random_range(2..=6);
        let m = r.random_range(2..=6);
        let symmetric = r.random_bool(0.5);
        let (c1, c2) = (random_cost(n, symmetric, &mut r), random_cost(m, symmetric, &mut r));
        let pi = random_matrix(n, m, &mut r);
        let grad = gw_gradient(&Coupling::new(pi.clone()).unwrap(), &c1, &c2).unwrap();
        let h = 1e-5;
        for i in 0..n {
            for j in 0..m {
                // f is quadratic, so the central quotient is exact up to rounding;
                // evaluate it on the quadruple-sum oracle to keep it independent
                let mut plus = pi.clone();
                plus[[i, j]] += h;
                let mut minus = pi.clone();
                minus[[i, j]] -= h;
                let fd = (quadratic_quadruple_sum(plus.view(), c1.view(), c2.view())
                    - quadratic_quadruple_sum(minus.view(), c1.view(), c2.view()))
                    / (2.0 * h);
                assert_relative_eq!(grad[[i, j]], fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn symmetric_gradient_is_minus_twice_the_product() {
    let mut r = rng(5);
    let (c1, c2) = (random_cost(4, true, &mut r), random_cost(3, true, &mut r));
    let pi = random_matrix(4, 3, &mut r);
    let grad = gw_gradient(&Coupling::new(pi.clone()).unwrap(), &c1, &c2).unwrap();
    let expected = c1.view().dot(&pi).dot(&c2.view()) * -2.0;
    for (g, e) in grad.iter().zip(expected.iter()) {
        assert!((g - e).abs() <= 1e-12);
    }
    assert!(gw_gradient(&Coupling::zeros(4, 3), &c1, &c2).unwrap().iter().all(|g| *g == 0.0));
}

#[test]
fn dimension_mismatch_is_rejected() {
    let c3 = CostMatrix::zeros(3);
    let c2 = CostMatrix::zeros(2);
    assert!(gw_quadratic(&Coupling::zeros(2, 2), &c3, &c2).is_err());
    assert!(gw_gradient(&Coupling::zeros(3, 3), &c3, &c2).is_err());
}

#[test]
fn lipschitz_examples() {
    let eye = CostMatrix::new(Array2::eye(3)).unwrap();
    assert_relative_eq!(lipschitz_bound(&eye, &eye).value, 2.0, max_relative = 1e-10);
    let swap = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
    assert_relative_eq!(lipschitz_bound(&swap, &swap).value, 2.0, max_relative = 1e-10);
}

#[test]
fn lipschitz_matches_dense_eigensolver() {
    let mut r = rng(6);
    for _ in 0..10 {
        let (c1, c2) = (random_cost(10, true, &mut r), random_cost(10, true, &mut r));
        let top = |c: &CostMatrix| dense(c.view()).symmetric_eigen().eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        let bound = lipschitz_bound(&c1, &c2);
        assert!(bound.converged);
        assert_relative_eq!(bound.value, 2.0 * top(&c1) * top(&c2), max_relative = 1e-8);
    }
}

#[test]
fn lipschitz_matches_singular_values_for_asymmetric_costs() {
    let mut r = rng(7);
    let (c1, c2) = (random_cost(7, false, &mut r), random_cost(5, false, &mut r));
    let top = |c: &CostMatrix| dense(c.view()).singular_values().max();
    assert_relative_eq!(lipschitz_bound(&c1, &c2).value, 2.0 * top(&c1) * top(&c2), max_relative = 1e-8);
}

fn small_problem() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..7, 1usize..7, any::<u64>())
}

proptest! {
    #[test]
    fn adjoint_identity((n, m, seed) in small_problem()) {
        let mut r = rng(seed);
        let pi = random_matrix(n, m, &mut r);
        let y: Array1<f64> = (0..n + m).map(|_| r.random_range(-1.0..1.0)).collect();
        let lhs = Array1::from(apply_a(pi.view()).to_vec()).dot(&y);
        let rhs = (&pi * &apply_a_adjoint(y.view(), n, m).unwrap()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn energy_minus_twice_quadratic_is_constant((n, m, seed) in small_problem()) {
        let mut r = rng(seed);
        let (c1, c2) = (random_cost(n, true, &mut r), random_cost(m, true, &mut r));
        let (a, b) = (random_marginals(n, &mut r), random_marginals(m, &mut r));
        let k = energy_constant(&c1, &c2, &a, &b).unwrap();
        for _ in 0..3 {
            let pi = Coupling::new(random_matrix(n, m, &mut r)).unwrap();
            let gap = gw_energy(&pi, &c1, &c2, &a, &b).unwrap() - 2.0 * gw_quadratic(&pi, &c1, &c2).unwrap();
            prop_assert!((gap - k).abs() <= 1e-12 * (1.0 + k.abs()));
        }
    }

    #[test]
    fn gradient_is_lipschitz_with_the_bound((n, m, seed) in small_problem()) {
        let mut r = rng(seed);
        let symmetric = r.random_bool(0.5);
        let (c1, c2) = (random_cost(n, symmetric, &mut r), random_cost(m, symmetric, &mut r));
        let l = lipschitz_bound(&c1, &c2).value;
        let p1 = random_matrix(n, m, &mut r);
        let p2 = random_matrix(n, m, &mut r);
        let g1 = gw_gradient(&Coupling::new(p1.clone()).unwrap(), &c1, &c2).unwrap();
        let g2 = gw_gradient(&Coupling::new(p2.clone()).unwrap(), &c1, &c2).unwrap();
        let lhs = (&g1 - &g2).mapv(|x| x * x).sum().sqrt();
        let rhs = l * (&p1 - &p2).mapv(|x| x * x).sum().sqrt();
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-14);
    }
}
