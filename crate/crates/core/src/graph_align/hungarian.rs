use ndarray::ArrayView2;

use crate::error::{dim_mismatch, Result};
use crate::gw::Coupling;

/// Permutation `sigma` maximising `sum_i P[i, sigma(i)]`.
///
/// Among optimal assignments the lexicographically smallest one is returned.
/// Entries within `1e-12 * max|P|` of the optimum in reduced cost count as
/// ties.
pub fn hungarian_round(pi: &Coupling) -> Result<Vec<usize>> {
    max_weight_assignment(pi.view())
}

pub fn max_weight_assignment(w: ArrayView2<f64>) -> Result<Vec<usize>> {
    let (n, m) = w.dim();
    if n != m {
        return Err(dim_mismatch("hungarian_round", "square matrix", format!("{n}x{m}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let (row_match, u, v) = shortest_augmenting_path(w);
    let scale = w.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let tight = |i: usize, j: usize| -w[[i, j]] - u[i] - v[j] <= tol;
    Ok(lexicographic_repair(n, row_match, tight))
}

/// Minimises `sum -w[i, sigma(i)]` with row/column potentials (O(n^3)).
/// Returns the row-to-column matching and the potentials.
fn shortest_augmenting_path(w: ArrayView2<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = w.nrows();
    let cost = |i: usize, j: usize| -w[[i, j]];
    // 1-based columns; column 0 is a virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_match = vec![0; n];
    for j in 1..=n {
        row_match[col_owner[j] - 1] = j - 1;
    }
    (row_match, u[1..].to_vec(), v[1..].to_vec())
}

/// Walks rows in order and gives each the smallest tight column that still
/// admits a perfect tight matching of the remaining rows, repairing the
/// current matching along an alternating path.
fn lexicographic_repair(n: usize, mut row_match: Vec<usize>, tight: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let mut col_match = vec![0; n];
    for (i, &j) in row_match.iter().enumerate() {
        col_match[j] = i;
    }
    let mut fixed_col = vec![false; n];
    let mut visited = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if fixed_col[j] || !tight(i, j) {
                continue;
            }
            if row_match[i] == j {
                break;
            }
            // give j to i; its owner r must reach the column i releases
            let r = col_match[j];
            let released = row_match[i];
            visited.fill(false);
            let mut path = Vec::new();
            if find_path(r, released, i, j, &row_match, &col_match, &fixed_col, &tight, &mut visited, &mut path) {
                // path holds (row, new column) pairs
                for &(row, col) in &path {
                    row_match[row] = col;
                    col_match[col] = row;
                }
                row_match[i] = j;
                col_match[j] = i;
                break;
            }
        }
        fixed_col[row_match[i]] = true;
    }
    row_match
}

/// Alternating DFS from `row` to column `target` over tight edges, avoiding
/// fixed columns and the pair `(skip_row, skip_col)` being installed.
#[allow(clippy::too_many_arguments)]
fn find_path(
    row: usize,
    target: usize,
    skip_row: usize,
    skip_col: usize,
    row_match: &[usize],
    col_match: &[usize],
    fixed_col: &[bool],
    tight: &impl Fn(usize, usize) -> bool,
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    let n = row_match.len();
    for c in 0..n {
        if fixed_col[c] || c == skip_col || visited[c] || !tight(row, c) {
            continue;
        }
        visited[c] = true;
        if c == target {
            path.push((row, c));
            return true;
        }
        let next = col_match[c];
        if next == skip_row {
            continue;
        }
        if find_path(next, target, skip_row, skip_col, row_match, col_match, fixed_col, tight, visited, path) {
            path.push((row, c));
            return true;
        }
    }
    false
}
