#[path = "common/oracles.rs"]
mod oracles;

use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng;

use gwot_core::graph_align::{
    accuracy, apsp_normalized, derive_seed, evaluate, flip_noise, gen_er_connected, hungarian_round, make_instance,
    max_weight_assignment, permute_graph, random_permutation, sparsity, Adjacency, RunStatus,
};
use gwot_core::{gw_energy, Coupling};
use oracles::*;

fn upper_edges(adj: &Adjacency) -> usize {
    let n = adj.nrows();
    (0..n).map(|i| (i + 1..n).filter(|&j| adj[[i, j]] == 1).count()).sum()
}

fn is_simple_symmetric(adj: &Adjacency) -> bool {
    let n = adj.nrows();
    (0..n).all(|i| adj[[i, i]] == 0 && (0..n).all(|j| adj[[i, j]] == adj[[j, i]] && adj[[i, j]] <= 1))
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

#[test]
fn hungarian_matches_brute_force_on_small_matrices() {
    let mut r = rng(40);
    for n in 1..=6 {
        for _ in 0..30 {
            // integer weights make ties common
            let w = Array2::from_shape_fn((n, n), |_| r.random_range(0..4) as f64);
            let sigma = max_weight_assignment(w.view()).unwrap();
            let (best, lex) = brute_force_assignment(w.view(), 1e-12);
            let value: f64 = sigma.iter().enumerate().map(|(i, &j)| w[[i, j]]).sum();
            assert_eq!(value, best);
            assert_eq!(sigma, lex);

            let w = random_matrix(n, n, &mut r);
            let sigma = max_weight_assignment(w.view()).unwrap();
            assert_eq!(sigma, brute_force_assignment(w.view(), 1e-12).1);
        }
    }
}

#[test]
fn hungarian_rounding_examples() {
    let sigma = vec![3, 1, 0, 2];
    assert_eq!(hungarian_round(&Coupling::from_permutation(&sigma)).unwrap(), sigma);
    let uniform = Coupling::new(Array2::from_elem((4, 4), 1.0 / 16.0)).unwrap();
    assert_eq!(hungarian_round(&uniform).unwrap(), vec![0, 1, 2, 3]);
    assert!(hungarian_round(&Coupling::zeros(2, 3)).is_err());
}

#[test]
fn edge_counts_follow_the_binomial_law() {
    let (n, p, seeds) = (100, 0.2, 20);
    let pairs = (n * (n - 1) / 2) as f64;
    let total: usize = (0..seeds).map(|s| upper_edges(&gen_er_connected(n, p, derive_seed(1, n, s)).unwrap())).sum();
    let mean = seeds as f64 * pairs * p;
    let sd = (seeds as f64 * pairs * p * (1.0 - p)).sqrt();
    assert!((total as f64 - mean).abs() <= 5.0 * sd, "{total} edges vs expected {mean} +- {sd}");
}

#[test]
fn flip_counts_follow_the_binomial_law() {
    let (n, eta, seeds) = (100, 0.1, 20);
    let pairs = (n * (n - 1) / 2) as f64;
    let mut flips = 0usize;
    for s in 0..seeds {
        let g = gen_er_connected(n, 0.2, derive_seed(2, n, s)).unwrap();
        let noisy = flip_noise(&g, eta, derive_seed(3, n, s)).unwrap();
        assert!(is_simple_symmetric(&noisy));
        flips += (0..n).map(|i| (i + 1..n).filter(|&j| g[[i, j]] != noisy[[i, j]]).count()).sum::<usize>();
    }
    let mean = seeds as f64 * pairs * eta;
    let sd = (seeds as f64 * pairs * eta * (1.0 - eta)).sqrt();
    assert!((flips as f64 - mean).abs() <= 5.0 * sd, "{flips} flips vs expected {mean} +- {sd}");
}

#[test]
fn instances_are_deterministic_and_normalised() {
    let a = make_instance(100, 0.2, 0.1, 77).unwrap();
    let b = make_instance(100, 0.2, 0.1, 77).unwrap();
    assert_eq!(a, b);
    for c in [&a.c1, &a.c2] {
        let v = c.view();
        assert!(c.is_symmetric());
        assert_eq!(v.iter().cloned().fold(0.0, f64::max), 1.0);
        assert!(v.diag().iter().all(|d| *d == 0.0));
        assert!(v.iter().all(|d| (0.0..=1.0).contains(d)));
    }
    assert_ne!(a, make_instance(100, 0.2, 0.1, 78).unwrap());
}

#[test]
fn noiseless_truth_has_zero_energy() {
    for seed in 0..5 {
        let inst = make_instance(30, 0.2, 0.0, seed).unwrap();
        let truth = Coupling::from_permutation(&inst.perm_true);
        // constant and quadratic part cancel up to rounding
        let e = gw_energy(&truth, &inst.c1, &inst.c2, &inst.p, &inst.q).unwrap();
        assert!(e.abs() <= 1e-14, "{e}");
        let m = evaluate(&truth, &inst, 0.0, 0, RunStatus::Ok).unwrap();
        assert_eq!(m.loss, e);
        assert_eq!(m.accuracy, 1.0);
        assert!(m.feasibility <= 1e-15);
        assert_eq!(m.sparsity, 1.0 - 1.0 / 30.0);
    }
}

#[test]
fn metric_examples() {
    let diag = Coupling::new(array![[0.5, 0.0], [0.0, 0.5]]).unwrap();
    assert_eq!(sparsity(&diag, 0.0), 0.5);
    let prod = Coupling::new(Array2::from_elem((2, 2), 0.25)).unwrap();
    assert_eq!(sparsity(&prod, 0.0), 0.0);
    assert_eq!(sparsity(&Coupling::new(array![[1e-12, 0.5]]).unwrap(), 1e-10), 0.5);
}

proptest! {
    #[test]
    fn graphs_are_simple_and_connected(n in 2usize..40, p in 0.15f64..0.9, seed in any::<u64>()) {
        let g = gen_er_connected(n, p, seed).unwrap();
        prop_assert!(is_simple_symmetric(&g));
        // connectivity: every hop distance is finite
        prop_assert!(apsp_normalized(&g).is_ok());
    }

    #[test]
    fn relabelling_is_an_isomorphism(n in 2usize..30, seed in any::<u64>()) {
        let g = gen_er_connected(n, 0.3, seed).unwrap();
        let perm = random_permutation(n, seed ^ 1);
        let h = permute_graph(&g, &perm).unwrap();
        prop_assert_eq!(permute_graph(&h, &inverse(&perm)).unwrap(), g.clone());
        let mut dg: Vec<u32> = g.rows().into_iter().map(|r| r.iter().map(|&e| e as u32).sum()).collect();
        let mut dh: Vec<u32> = h.rows().into_iter().map(|r| r.iter().map(|&e| e as u32).sum()).collect();
        dg.sort_unstable();
        dh.sort_unstable();
        prop_assert_eq!(dg, dh);
        prop_assert_eq!(permute_graph(&g, &(0..n).collect::<Vec<_>>()).unwrap(), g);
    }

    #[test]
    fn distances_form_a_metric(n in 2usize..25, seed in any::<u64>()) {
        let c = apsp_normalized(&gen_er_connected(n, 0.25, seed).unwrap()).unwrap();
        let d = c.view();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(d[[i, j]], d[[j, i]]);
                for k in 0..n {
                    prop_assert!(d[[i, k]] <= d[[i, j]] + d[[j, k]] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn accuracy_is_invariant_under_relabelling(n in 1usize..30, seed in any::<u64>()) {
        let truth = random_permutation(n, seed);
        let pred = random_permutation(n, seed ^ 5);
        prop_assert_eq!(accuracy(&truth, &truth), 1.0);
        let relabel = random_permutation(n, seed ^ 9);
        let map = |p: &[usize]| p.iter().map(|&j| relabel[j]).collect::<Vec<_>>();
        prop_assert_eq!(accuracy(&map(&pred), &map(&truth)), accuracy(&pred, &truth));
    }

    #[test]
    fn hungarian_agrees_with_brute_force(n in 1usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = random_matrix(n, n, &mut r);
        let (best, _) = brute_force_assignment(w.view(), 0.0);
        let sigma = max_weight_assignment(w.view()).unwrap();
        let value: f64 = sigma.iter().enumerate().map(|(i, &j)| w[[i, j]]).sum();
        prop_assert!((value - best).abs() <= 1e-12);
    }
}
