//! Brute-force reference implementations used to check the fast paths.
#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gwot_core::{round_to_polytope, Coupling, CostMatrix, Marginals};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_marginals(n: usize, rng: &mut ChaCha8Rng) -> Marginals {
    let w: Array1<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total = w.sum();
    let mut w = w / total;
    // push the rounding error into the last weight
    let drift = 1.0 - w.sum();
    w[n - 1] += drift;
    Marginals::new(w).unwrap()
}

pub fn random_cost(n: usize, symmetric: bool, rng: &mut ChaCha8Rng) -> CostMatrix {
    let mut c = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0));
    if symmetric {
        c = (&c + &c.t()) * 0.5;
        c.diag_mut().fill(0.0);
    }
    CostMatrix::new(c).unwrap()
}

pub fn random_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..1.0))
}

/// A random point of `U(a, b)`.
pub fn random_feasible(a: &Marginals, b: &Marginals, rng: &mut ChaCha8Rng) -> Coupling {
    let raw = random_matrix(a.len(), b.len(), rng) / (a.len() * b.len()) as f64;
    round_to_polytope(&Coupling::new(raw).unwrap(), a.view(), b.view()).unwrap()
}

/// `-sum_{i,k,j,l} C1[i,k] C2[j,l] P[i,j] P[k,l]`.
pub fn quadratic_quadruple_sum(pi: ArrayView2<f64>, c1: ArrayView2<f64>, c2: ArrayView2<f64>) -> f64 {
    let (n, m) = pi.dim();
    let mut total = 0.0;
    for i in 0..n {
        for k in 0..n {
            for j in 0..m {
                for l in 0..m {
                    total += c1[[i, k]] * c2[[j, l]] * pi[[i, j]] * pi[[k, l]];
                }
            }
        }
    }
    -total
}

/// `sum_{i,k,j,l} (C1[i,k] - C2[j,l])^2 P[i,j] P[k,l]`.
pub fn energy_quadruple_sum(pi: ArrayView2<f64>, c1: ArrayView2<f64>, c2: ArrayView2<f64>) -> f64 {
    let (n, m) = pi.dim();
    let mut total = 0.0;
    for i in 0..n {
        for k in 0..n {
            for j in 0..m {
                for l in 0..m {
                    let d = c1[[i, k]] - c2[[j, l]];
                    total += d * d * pi[[i, j]] * pi[[k, l]];
                }
            }
        }
    }
    total
}

/// Heap's algorithm over all permutations of `0..n`.
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Largest `sum_i w[i, sigma(i)]` over all permutations, with the
/// lexicographically smallest maximiser (ties within `tol`).
pub fn brute_force_assignment(w: ArrayView2<f64>, tol: f64) -> (f64, Vec<usize>) {
    let n = w.nrows();
    let mut best = f64::NEG_INFINITY;
    let mut values = Vec::new();
    for_each_permutation(n, |p| {
        let v: f64 = p.iter().enumerate().map(|(i, &j)| w[[i, j]]).sum();
        best = best.max(v);
        values.push((v, p.to_vec()));
    });
    let winner = values.into_iter().filter(|(v, _)| *v >= best - tol).map(|(_, p)| p).min().unwrap();
    (best, winner)
}

/// Minimum of `<cost, P>` over the vertices of `U(a, b)`, found by trying
/// every support of `n + m - 1` cells that determines a unique plan.
pub fn vertex_enumeration_ot(cost: ArrayView2<f64>, a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = cost.dim();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    subsets(&cells, k, 0, &mut chosen, &mut |support| {
        if let Some(plan) = plan_on_support(support, a, b) {
            let value: f64 = support.iter().zip(&plan).map(|(&(i, j), p)| cost[[i, j]] * p).sum();
            best = best.min(value);
        }
    });
    best
}

fn subsets(cells: &[(usize, usize)], k: usize, start: usize, chosen: &mut Vec<(usize, usize)>, visit: &mut impl FnMut(&[(usize, usize)])) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    for idx in start..cells.len() {
        if cells.len() - idx < k - chosen.len() {
            break;
        }
        chosen.push(cells[idx]);
        subsets(cells, k, idx + 1, chosen, visit);
        chosen.pop();
    }
}

/// Solves the marginal equations on a spanning-tree support by peeling
/// leaves; `None` if the support has a cycle or the plan is negative.
fn plan_on_support(support: &[(usize, usize)], a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let (n, m) = (a.len(), b.len());
    let mut row_left = a.to_vec();
    let mut col_left = b.to_vec();
    let mut value = vec![f64::NAN; support.len()];
    let mut open = support.len();
    while open > 0 {
        let mut progressed = false;
        for node in 0..n + m {
            let incident: Vec<usize> = (0..support.len())
                .filter(|&c| value[c].is_nan() && if node < n { support[c].0 == node } else { support[c].1 == node - n })
                .collect();
            if incident.len() != 1 {
                continue;
            }
            let c = incident[0];
            let (i, j) = support[c];
            let x = if node < n { row_left[i] } else { col_left[j] };
            value[c] = x;
            row_left[i] -= x;
            col_left[j] -= x;
            open -= 1;
            progressed = true;
        }
        if !progressed {
            return None;
        }
    }
    let ok = value.iter().all(|&x| x >= -1e-12)
        && row_left.iter().chain(&col_left).all(|r| r.abs() <= 1e-12);
    ok.then_some(value)
}
