//! Transportation simplex on the complete bipartite graph.
//!
//! The basis is a spanning tree over the `n + m` row/column nodes with
//! `n + m - 1` basic cells; degenerate basic cells carry flow 0. Entering
//! cells are chosen by most negative reduced cost; after a long run of
//! degenerate pivots the solver switches to Bland's rule (smallest cell index
//! for both entering and leaving) until a pivot makes progress again.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{dim_mismatch, GwError, Result};
use crate::gw::Coupling;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN_LIMIT: usize = 1000;

/// Exact optimal transport plan at a basic feasible solution.
#[derive(Debug, Clone)]
pub struct OtPlan {
    pub plan: Coupling,
    /// `<cost, plan>`.
    pub objective: f64,
    /// Number of basic cells (`n + m - 1`).
    pub basis_size: usize,
    /// Row potentials `u`; reduced costs are `c_ij - u_i - v_j`.
    pub row_potentials: Array1<f64>,
    pub col_potentials: Array1<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    row: usize,
    col: usize,
    flow: f64,
}

struct Tree {
    n: usize,
    cells: Vec<Cell>,
    /// Basic cell indices incident to each node (rows `0..n`, columns `n..n+m`).
    incident: Vec<Vec<usize>>,
    parent_cell: Vec<usize>,
    parent_node: Vec<usize>,
    depth: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Tree {
    fn node_of(&self, cell: &Cell, row_side: bool) -> usize {
        if row_side {
            cell.row
        } else {
            self.n + cell.col
        }
    }

    fn other_end(&self, cell_idx: usize, node: usize) -> usize {
        let c = &self.cells[cell_idx];
        if node < self.n {
            self.n + c.col
        } else {
            c.row
        }
    }

    /// Re-roots at row 0 and recomputes potentials, parents and depths.
    fn refresh(&mut self, cost: ArrayView2<f64>) {
        let total = self.incident.len();
        let mut seen = vec![false; total];
        let mut queue = VecDeque::with_capacity(total);
        self.u[0] = 0.0;
        self.depth[0] = 0;
        self.parent_cell[0] = usize::MAX;
        self.parent_node[0] = usize::MAX;
        seen[0] = true;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for k in 0..self.incident[node].len() {
                let cell_idx = self.incident[node][k];
                let next = self.other_end(cell_idx, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let c = self.cells[cell_idx];
                let cij = cost[[c.row, c.col]];
                if next < self.n {
                    self.u[next] = cij - self.v[c.col];
                } else {
                    self.v[next - self.n] = cij - self.u[c.row];
                }
                self.parent_cell[next] = cell_idx;
                self.parent_node[next] = node;
                self.depth[next] = self.depth[node] + 1;
                queue.push_back(next);
            }
        }
        debug_assert!(seen.iter().all(|s| *s), "basis is not a spanning tree");
    }

    /// Cells on the tree path from column node `n + col` to row node `row`,
    /// in that order.
    fn path(&self, row: usize, col: usize) -> Vec<usize> {
        let mut from_col = Vec::new();
        let mut from_row = Vec::new();
        let mut x = self.n + col;
        let mut y = row;
        while self.depth[x] > self.depth[y] {
            from_col.push(self.parent_cell[x]);
            x = self.parent_node[x];
        }
        while self.depth[y] > self.depth[x] {
            from_row.push(self.parent_cell[y]);
            y = self.parent_node[y];
        }
        while x != y {
            from_col.push(self.parent_cell[x]);
            x = self.parent_node[x];
            from_row.push(self.parent_cell[y]);
            y = self.parent_node[y];
        }
        from_col.extend(from_row.into_iter().rev());
        from_col
    }

    fn remove_incident(&mut self, node: usize, cell_idx: usize) {
        let list = &mut self.incident[node];
        let pos = list.iter().position(|&c| c == cell_idx).expect("cell is incident");
        list.swap_remove(pos);
    }
}

/// North-west corner rule: exactly `n + m - 1` cells, degenerate ones at 0.
fn northwest_corner(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Vec<Cell> {
    let (n, m) = (a.len(), b.len());
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut cells = Vec::with_capacity(n + m - 1);
    loop {
        let flow = ra[i].min(rb[j]);
        cells.push(Cell { row: i, col: j, flow });
        ra[i] -= flow;
        rb[j] -= flow;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if j == m - 1 || (i < n - 1 && ra[i] <= rb[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    cells
}

/// Solves `min <cost, P>` over `U(a, b)` exactly, with the default pivot cap
/// of `10 n m`.
pub fn ot_network_simplex(cost: ArrayView2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<OtPlan> {
    let (n, m) = cost.dim();
    ot_network_simplex_with_limit(cost, a, b, 10 * n * m)
}

pub fn ot_network_simplex_with_limit(
    cost: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    max_pivots: usize,
) -> Result<OtPlan> {
    let (n, m) = cost.dim();
    if a.len() != n || b.len() != m {
        return Err(dim_mismatch("ot_network_simplex", format!("({n}, {m})"), format!("({}, {})", a.len(), b.len())));
    }
    if n == 0 || m == 0 {
        return Err(dim_mismatch("ot_network_simplex", "nonempty cost", format!("{n}x{m}")));
    }
    let (mass_a, mass_b) = (a.sum(), b.sum());
    if (mass_a - mass_b).abs() > 1e-10 {
        return Err(GwError::MassMismatch { source_mass: mass_a, target_mass: mass_b });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(GwError::InvalidCost("transport cost must be finite".into()));
    }
    if a.iter().chain(b.iter()).any(|w| !w.is_finite() || *w < 0.0) {
        return Err(GwError::InvalidMarginals("supplies must be finite and nonnegative".into()));
    }

    let cells = northwest_corner(a, b);
    let mut incident = vec![Vec::new(); n + m];
    for (idx, c) in cells.iter().enumerate() {
        incident[c.row].push(idx);
        incident[n + c.col].push(idx);
    }
    let mut tree = Tree {
        n,
        cells,
        incident,
        parent_cell: vec![usize::MAX; n + m],
        parent_node: vec![usize::MAX; n + m],
        depth: vec![0; n + m],
        u: vec![0.0; n],
        v: vec![0.0; m],
    };
    tree.refresh(cost);

    let scale = cost.iter().fold(1.0_f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-12 * scale;
    let mut pivots = 0;
    let mut degenerate_run = 0;

    loop {
        let bland = degenerate_run >= DEGENERATE_RUN_LIMIT;
        let Some((row, col, rc)) = select_entering(cost, &tree, tol, bland) else {
            break;
        };
        if pivots >= max_pivots {
            return Err(GwError::PivotLimit { pivots, reduced_cost: rc });
        }
        pivots += 1;

        let path = tree.path(row, col);
        // signs alternate along the path, starting with a decrease next to the column
        let mut leave_pos = 0;
        let mut theta = f64::INFINITY;
        for (pos, &cell_idx) in path.iter().enumerate().step_by(2) {
            let c = tree.cells[cell_idx];
            let better = if bland {
                c.flow < theta || (c.flow == theta && c.row * m + c.col < {
                    let l = tree.cells[path[leave_pos]];
                    l.row * m + l.col
                })
            } else {
                c.flow < theta
            };
            if better {
                theta = c.flow;
                leave_pos = pos;
            }
        }
        for (pos, &cell_idx) in path.iter().enumerate() {
            let c = &mut tree.cells[cell_idx];
            if pos % 2 == 0 {
                c.flow = (c.flow - theta).max(0.0);
            } else {
                c.flow += theta;
            }
        }
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };

        let leaving = path[leave_pos];
        let old = tree.cells[leaving];
        tree.remove_incident(tree.node_of(&old, true), leaving);
        tree.remove_incident(tree.node_of(&old, false), leaving);
        tree.cells[leaving] = Cell { row, col, flow: theta };
        tree.incident[row].push(leaving);
        tree.incident[n + col].push(leaving);
        tree.refresh(cost);
    }

    let mut plan = Array2::zeros((n, m));
    let mut objective = 0.0;
    for c in &tree.cells {
        plan[[c.row, c.col]] = c.flow;
        objective += c.flow * cost[[c.row, c.col]];
    }
    Ok(OtPlan {
        plan: Coupling::from_nonnegative(plan),
        objective,
        basis_size: tree.cells.len(),
        row_potentials: Array1::from(tree.u),
        col_potentials: Array1::from(tree.v),
        pivots,
    })
}

/// Most negative reduced cost, or the first negative one in cell order under
/// Bland's rule. `None` at optimality.
fn select_entering(cost: ArrayView2<f64>, tree: &Tree, tol: f64, bland: bool) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, row) in cost.outer_iter().enumerate() {
        let ui = tree.u[i];
        for (j, (&cij, &vj)) in row.iter().zip(tree.v.iter()).enumerate() {
            let rc = cij - ui - vj;
            if rc < -tol {
                if bland {
                    return Some((i, j, rc));
                }
                if best.map_or(true, |(_, _, r)| rc < r) {
                    best = Some((i, j, rc));
                }
            }
        }
    }
    best
}
