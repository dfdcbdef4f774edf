//! Euclidean projection onto the transport polytope `U(a, b)`.
//!
//! The projection of a point `Z` is computed through its dual
//!
//! ```text
//! g(y) = 1/2 ||max(0, A*y + Z)||_F^2 - <r, y>,    grad g(y) = A max(0, A*y + Z) - r
//! ```
//!
//! where `A` maps a matrix to its (row sums, column sums), `A*y = u 1' + 1 v'`
//! and `r = (a, b)`. `grad g` is `(n + m)`-Lipschitz because `||A||_2^2 = n + m`,
//! so the accelerated solver below runs with the fixed step `1 / (n + m)`.
//!
//! A dual iterate is accepted once the primal feasibility residual of the
//! matrix it induces satisfies `||A P - r||_2 <= eps / (1 + ||y||_2)`. The test
//! needs nothing but the current iterate.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{dim_mismatch, GwError, Result};
use crate::gw::{apply_a, Coupling, Marginals};

/// Safety cap on inner iterations.
pub const MAX_INNER_ITERATIONS: usize = 100_000;

/// Requested tolerances at or below this value are treated as "solve to a
/// residual of `EXACT_RESIDUAL_FLOOR`".
pub const EXACT_RESIDUAL_FLOOR: f64 = 1e-14;

/// Default gradient-norm tolerance of [`solve_projection_exact`].
pub const DEFAULT_EXACT_TOL: f64 = 1e-12;

/// Lagrange multipliers for the row (`u`) and column (`v`) constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

impl DualVector {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { u: Array1::zeros(n), v: Array1::zeros(m) }
    }

    /// Splits a concatenated `(u, v)` vector after its first `n` entries.
    pub fn from_concatenated(y: ArrayView1<f64>, n: usize) -> Self {
        Self {
            u: y.slice(ndarray::s![..n]).to_owned(),
            v: y.slice(ndarray::s![n..]).to_owned(),
        }
    }

    pub fn to_concatenated(&self) -> Array1<f64> {
        self.u.iter().chain(self.v.iter()).copied().collect()
    }

    pub fn norm(&self) -> f64 {
        (self.u.dot(&self.u) + self.v.dot(&self.v)).sqrt()
    }
}

/// Outcome of a projection solve.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub coupling: Coupling,
    pub dual: DualVector,
    /// `||A coupling - r||_2`.
    pub residual_l2: f64,
    pub inner_iterations: usize,
    pub converged: bool,
}

fn check_dims(y: &DualVector, z: ArrayView2<f64>) -> Result<()> {
    let (n, m) = z.dim();
    if y.u.len() != n || y.v.len() != m {
        return Err(dim_mismatch(
            "dual vector",
            format!("({n}, {m})"),
            format!("({}, {})", y.u.len(), y.v.len()),
        ));
    }
    Ok(())
}

fn check_marginals(z: ArrayView2<f64>, a: &Marginals, b: &Marginals) -> Result<()> {
    let (n, m) = z.dim();
    if a.len() != n || b.len() != m {
        return Err(dim_mismatch(
            "projection marginals",
            format!("({n}, {m})"),
            format!("({}, {})", a.len(), b.len()),
        ));
    }
    Ok(())
}

/// `max(0, u_i + v_j + z_ij)`.
pub fn primal_from_dual(y: &DualVector, z: ArrayView2<f64>) -> Result<Coupling> {
    check_dims(y, z)?;
    Ok(Coupling::from_nonnegative(primal_matrix(y.u.view(), y.v.view(), z)))
}

fn primal_matrix(u: ArrayView1<f64>, v: ArrayView1<f64>, z: ArrayView2<f64>) -> Array2<f64> {
    let mut out = z.to_owned();
    for (mut row, &ui) in out.outer_iter_mut().zip(u.iter()) {
        for (p, &vj) in row.iter_mut().zip(v.iter()) {
            *p = (*p + ui + vj).max(0.0);
        }
    }
    out
}

/// `g(y) = 1/2 ||primal_from_dual(y, z)||_F^2 - <r, y>`.
pub fn dual_value(y: &DualVector, z: ArrayView2<f64>, a: &Marginals, b: &Marginals) -> Result<f64> {
    check_dims(y, z)?;
    check_marginals(z, a, b)?;
    let mut ws = Workspace::new(z.nrows(), z.ncols());
    Ok(ws.evaluate(y.u.view(), y.v.view(), z, a.view(), b.view()))
}

/// `grad g(y) = A primal_from_dual(y, z) - r`, concatenated as `(rows, cols)`.
pub fn dual_gradient(y: &DualVector, z: ArrayView2<f64>, a: &Marginals, b: &Marginals) -> Result<Array1<f64>> {
    check_dims(y, z)?;
    check_marginals(z, a, b)?;
    let mut ws = Workspace::new(z.nrows(), z.ncols());
    ws.evaluate(y.u.view(), y.v.view(), z, a.view(), b.view());
    Ok(ws.grad)
}

/// Scratch space for one fused pass over `Z`: value, gradient and residual.
struct Workspace {
    n: usize,
    grad: Array1<f64>,
    residual: f64,
}

impl Workspace {
    fn new(n: usize, m: usize) -> Self {
        Self { n, grad: Array1::zeros(n + m), residual: 0.0 }
    }

    fn evaluate(
        &mut self,
        u: ArrayView1<f64>,
        v: ArrayView1<f64>,
        z: ArrayView2<f64>,
        a: ArrayView1<f64>,
        b: ArrayView1<f64>,
    ) -> f64 {
        let n = self.n;
        self.grad.fill(0.0);
        let grad = self.grad.as_slice_mut().expect("contiguous workspace");
        let (rows, cols) = grad.split_at_mut(n);
        let v = v.as_slice().expect("contiguous dual");
        let mut sq = 0.0;
        for (i, zrow) in z.outer_iter().enumerate() {
            let (row_acc, row_sq) = match zrow.as_slice() {
                Some(zrow) => fused_row(zrow, u[i], v, cols),
                None => fused_row(&zrow.to_vec(), u[i], v, cols),
            };
            rows[i] = row_acc - a[i];
            sq += row_sq;
        }
        for (c, &t) in cols.iter_mut().zip(b.iter()) {
            *c -= t;
        }
        self.residual = self.grad.dot(&self.grad).sqrt();
        0.5 * sq - u.dot(&a) - v.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>()
    }
}

const LANES: usize = 8;

/// Adds `max(0, z_j + ui + v_j)` into `cols` and returns the row sum and the
/// row sum of squares. Independent lane accumulators let the loop vectorize.
#[inline]
fn fused_row(zrow: &[f64], ui: f64, v: &[f64], cols: &mut [f64]) -> (f64, f64) {
    let mut sum = [0.0; LANES];
    let mut sq = [0.0; LANES];
    let split = zrow.len() - zrow.len() % LANES;
    let (z_head, z_tail) = zrow.split_at(split);
    let (v_head, v_tail) = v.split_at(split);
    let (c_head, c_tail) = cols.split_at_mut(split);
    for ((zc, vc), cc) in z_head.chunks_exact(LANES).zip(v_head.chunks_exact(LANES)).zip(c_head.chunks_exact_mut(LANES)) {
        for l in 0..LANES {
            let p = (zc[l] + ui + vc[l]).max(0.0);
            sum[l] += p;
            sq[l] += p * p;
            cc[l] += p;
        }
    }
    let mut row_sum: f64 = sum.iter().sum();
    let mut row_sq: f64 = sq.iter().sum();
    for ((&zj, &vj), c) in z_tail.iter().zip(v_tail).zip(c_tail.iter_mut()) {
        let p = (zj + ui + vj).max(0.0);
        row_sum += p;
        row_sq += p * p;
        *c += p;
    }
    (row_sum, row_sq)
}

#[derive(Debug, Clone, Copy)]
enum StopRule {
    /// `residual * (1 + ||y||) <= eps`
    Inexact(f64),
    /// `residual <= tol`
    Absolute(f64),
}

impl StopRule {
    fn for_eps(eps: f64) -> Self {
        if eps <= EXACT_RESIDUAL_FLOOR {
            StopRule::Absolute(EXACT_RESIDUAL_FLOOR)
        } else {
            StopRule::Inexact(eps)
        }
    }

    /// Lower is better; `<= 0` means accepted.
    fn excess(self, residual: f64, y_norm: f64) -> f64 {
        match self {
            StopRule::Inexact(eps) => residual * (1.0 + y_norm) - eps,
            StopRule::Absolute(tol) => residual - tol,
        }
    }
}

/// Accelerated gradient on the dual with function-value restart.
fn accelerated_dual_solve(
    z: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    y_warm: &DualVector,
    rule: StopRule,
) -> ProjectionResult {
    let (n, m) = z.dim();
    let step = 1.0 / (n + m) as f64;
    let mut ws = Workspace::new(n, m);

    let mut x_prev = y_warm.to_concatenated();
    let mut val_prev = ws.evaluate(x_prev.slice(ndarray::s![..n]), x_prev.slice(ndarray::s![n..]), z, a, b);

    let norm = |y: &Array1<f64>| y.dot(y).sqrt();
    let finish = |y: Array1<f64>, residual: f64, iterations: usize, converged: bool| {
        let dual = DualVector::from_concatenated(y.view(), n);
        let coupling = Coupling::from_nonnegative(primal_matrix(dual.u.view(), dual.v.view(), z));
        ProjectionResult { coupling, dual, residual_l2: residual, inner_iterations: iterations, converged }
    };

    let mut best = (rule.excess(ws.residual, norm(&x_prev)), x_prev.clone(), ws.residual);
    if best.0 <= 0.0 {
        return finish(x_prev, ws.residual, 0, true);
    }

    let mut w = x_prev.clone();
    let mut x = x_prev.clone();
    let mut t = 1.0_f64;
    for it in 1..=MAX_INNER_ITERATIONS {
        ws.evaluate(w.slice(ndarray::s![..n]), w.slice(ndarray::s![n..]), z, a, b);
        // x = w - step * grad g(w)
        x.assign(&w);
        x.scaled_add(-step, &ws.grad);

        let val = ws.evaluate(x.slice(ndarray::s![..n]), x.slice(ndarray::s![n..]), z, a, b);
        let excess = rule.excess(ws.residual, norm(&x));
        if excess <= 0.0 {
            return finish(x, ws.residual, it, true);
        }
        if excess < best.0 {
            best = (excess, x.clone(), ws.residual);
        }

        // a plain gradient step (t == 1) cannot increase g; an observed
        // increase there is rounding noise and restarting would repeat it
        if val > val_prev && t > 1.0 {
            // restart momentum from the last accepted point
            t = 1.0;
            w.assign(&x_prev);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        // w = x + beta (x - x_prev)
        w.assign(&x);
        w *= 1.0 + beta;
        w.scaled_add(-beta, &x_prev);
        std::mem::swap(&mut x_prev, &mut x);
        val_prev = val;
        t = t_next;
    }
    let (_, y, residual) = best;
    finish(y, residual, MAX_INNER_ITERATIONS, false)
}

/// Approximately projects `z` onto `U(a, b)`.
///
/// Returns once `residual_l2 * (1 + ||dual||_2) <= eps_k`, warm-starting from
/// `y_warm`. Tolerances at or below [`EXACT_RESIDUAL_FLOOR`] are replaced by
/// the absolute requirement `residual_l2 <= EXACT_RESIDUAL_FLOOR`. When the
/// iteration cap is reached the best iterate is returned with
/// `converged = false`.
pub fn solve_projection_inexact(
    z: ArrayView2<f64>,
    a: &Marginals,
    b: &Marginals,
    eps_k: f64,
    y_warm: &DualVector,
) -> Result<ProjectionResult> {
    if !(eps_k >= 0.0) {
        return Err(GwError::InvalidParameter { name: "eps_k", reason: format!("must be >= 0, got {eps_k}") });
    }
    check_dims(y_warm, z)?;
    check_marginals(z, a, b)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(GwError::Numerical("projection target has non-finite entries".into()));
    }
    Ok(accelerated_dual_solve(z, a.view(), b.view(), y_warm, StopRule::for_eps(eps_k)))
}

/// High-accuracy projection used as a reference: the dual is driven to
/// `||grad g|| <= tol`, then the induced matrix is rounded so the returned
/// coupling is feasible up to floating-point error.
pub fn solve_projection_exact(
    z: ArrayView2<f64>,
    a: &Marginals,
    b: &Marginals,
    tol: f64,
) -> Result<ProjectionResult> {
    if !(tol > 0.0) {
        return Err(GwError::InvalidParameter { name: "tol", reason: format!("must be > 0, got {tol}") });
    }
    check_marginals(z, a, b)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(GwError::Numerical("projection target has non-finite entries".into()));
    }
    let (n, m) = z.dim();
    let raw = accelerated_dual_solve(z, a.view(), b.view(), &DualVector::zeros(n, m), StopRule::Absolute(tol));
    let coupling = round_to_polytope(&raw.coupling, a.view(), b.view())?;
    let residual_l2 = apply_a(coupling.view()).residual(a.view(), b.view());
    Ok(ProjectionResult { coupling, residual_l2, ..raw })
}

/// Repairs a nonnegative matrix into an exactly feasible coupling.
///
/// Rows are scaled down to at most `a`, columns down to at most `b`, and the
/// remaining deficits are filled with the rank-one term
/// `err_a err_b' / ||err_a||_1`. The result satisfies
/// `||pi - out||_1 <= 2 (||a - pi 1||_1 + ||b - pi' 1||_1)`.
pub fn round_to_polytope(pi: &Coupling, a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<Coupling> {
    let (n, m) = pi.dim();
    if a.len() != n || b.len() != m {
        return Err(dim_mismatch("round_to_polytope", format!("({n}, {m})"), format!("({}, {})", a.len(), b.len())));
    }
    let (mass_a, mass_b) = (a.sum(), b.sum());
    if (mass_a - mass_b).abs() > 1e-10 {
        return Err(GwError::MassMismatch { source_mass: mass_a, target_mass: mass_b });
    }

    let mut out = pi.view().to_owned();
    for (mut row, &target) in out.outer_iter_mut().zip(a.iter()) {
        let total = row.sum();
        if total > target {
            let scale = target / total;
            row.mapv_inplace(|v| v * scale);
        }
    }
    let col_totals = out.sum_axis(ndarray::Axis(0));
    for (j, (&total, &target)) in col_totals.iter().zip(b.iter()).enumerate() {
        if total > target {
            let scale = target / total;
            out.column_mut(j).mapv_inplace(|v| v * scale);
        }
    }

    let image = apply_a(out.view());
    let err_a: Array1<f64> = (&a - &image.row_sums).mapv(|v| v.max(0.0));
    let err_b: Array1<f64> = (&b - &image.col_sums).mapv(|v| v.max(0.0));
    let mass = err_a.sum();
    if mass > 0.0 {
        for (mut row, &ea) in out.outer_iter_mut().zip(err_a.iter()) {
            if ea == 0.0 {
                continue;
            }
            let w = ea / mass;
            row.zip_mut_with(&err_b, |p, &eb| *p += w * eb);
        }
    }
    Ok(Coupling::from_nonnegative(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn half() -> Marginals {
        Marginals::uniform(2)
    }

    #[test]
    fn primal_from_dual_examples() {
        let z = array![[0.1, 0.2], [0.3, 0.0]];
        let p = primal_from_dual(&DualVector::zeros(2, 2), z.view()).unwrap();
        assert_eq!(p.view(), z.view());

        let y = DualVector { u: array![1.0, -1.0], v: array![0.0, 0.0] };
        let z = array![[-0.5, -0.5], [0.5, 0.5]];
        let p = primal_from_dual(&y, z.view()).unwrap();
        assert_eq!(p.view(), array![[0.5, 0.5], [0.0, 0.0]].view());

        let y = DualVector { u: array![0.25, 0.5], v: array![1.0, 0.0] };
        let z = Array2::from_shape_fn((2, 2), |(i, j)| -(y.u[i] + y.v[j]));
        let p = primal_from_dual(&y, z.view()).unwrap();
        assert!(p.view().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dual_value_and_gradient_examples() {
        let y = DualVector::zeros(2, 2);
        let zero = Array2::<f64>::zeros((2, 2));
        assert_eq!(dual_value(&y, zero.view(), &half(), &half()).unwrap(), 0.0);
        // max(0, .) == 0 everywhere: gradient is -r
        let g = dual_gradient(&y, zero.view(), &half(), &half()).unwrap();
        assert_eq!(g, array![-0.5, -0.5, -0.5, -0.5]);

        let ab = Coupling::product(&half(), &half()).into_inner();
        assert_abs_diff_eq!(dual_value(&y, ab.view(), &half(), &half()).unwrap(), 0.5 * 0.25);
        let g = dual_gradient(&y, ab.view(), &half(), &half()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-16));
    }

    #[test]
    fn inexact_solve_at_feasible_point_returns_immediately() {
        let a = Marginals::new(array![0.2, 0.8]).unwrap();
        let b = Marginals::new(array![0.6, 0.4]).unwrap();
        let z = Coupling::product(&a, &b).into_inner();
        for eps in [1.0, 1e-6, 0.0] {
            let res = solve_projection_inexact(z.view(), &a, &b, eps, &DualVector::zeros(2, 2)).unwrap();
            assert!(res.converged);
            assert_eq!(res.inner_iterations, 0);
            assert_eq!(res.dual, DualVector::zeros(2, 2));
            assert!(res.residual_l2 < 1e-15);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        // U(a,b) = {[[t, .5-t], [.5-t, t]]}; t* = (z11+z22-z12-z21+1)/4 = .75 clamps to .5
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        let expected = array![[0.5, 0.0], [0.0, 0.5]];
        let exact = solve_projection_exact(z.view(), &half(), &half(), DEFAULT_EXACT_TOL).unwrap();
        assert!(exact.converged);
        assert_abs_diff_eq!(exact.coupling.view(), expected.view(), epsilon = 1e-12);

        let inexact = solve_projection_inexact(z.view(), &half(), &half(), 1e-10, &DualVector::zeros(2, 2)).unwrap();
        assert!(inexact.converged);
        assert_abs_diff_eq!(inexact.coupling.view(), expected.view(), epsilon = 1e-8);
    }

    #[test]
    fn interior_one_parameter_projection() {
        // unclamped case: t* = (0.3 + 0.2 - 0.1 - 0.0 + 1) / 4 = 0.35
        let z = array![[0.3, 0.1], [0.0, 0.2]];
        let exact = solve_projection_exact(z.view(), &half(), &half(), DEFAULT_EXACT_TOL).unwrap();
        let expected = array![[0.35, 0.15], [0.15, 0.35]];
        assert_abs_diff_eq!(exact.coupling.view(), expected.view(), epsilon = 1e-12);
    }

    #[test]
    fn singleton_polytope() {
        let one = Marginals::uniform(1);
        for v in [-3.0, 0.0, 0.7, 12.0] {
            let res = solve_projection_exact(array![[v]].view(), &one, &one, DEFAULT_EXACT_TOL).unwrap();
            assert_abs_diff_eq!(res.coupling.view()[[0, 0]], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_projection_is_idempotent_on_feasible_points() {
        let a = Marginals::new(array![0.5, 0.3, 0.2]).unwrap();
        let b = Marginals::new(array![0.25, 0.25, 0.5]).unwrap();
        let z = array![[0.2, 0.1, 0.2], [0.05, 0.05, 0.2], [0.0, 0.1, 0.1]];
        let res = solve_projection_exact(z.view(), &a, &b, DEFAULT_EXACT_TOL).unwrap();
        assert_abs_diff_eq!(res.coupling.view(), z.view(), epsilon = 1e-12);
    }

    #[test]
    fn rounding_examples() {
        let a = Marginals::new(array![0.5, 0.3, 0.2]).unwrap();
        let b = Marginals::new(array![0.25, 0.25, 0.5]).unwrap();
        let feasible = Coupling::new(array![[0.2, 0.1, 0.2], [0.05, 0.05, 0.2], [0.0, 0.1, 0.1]]).unwrap();
        let out = round_to_polytope(&feasible, a.view(), b.view()).unwrap();
        assert_abs_diff_eq!(out.view(), feasible.view(), epsilon = 1e-16);

        let out = round_to_polytope(&Coupling::zeros(2, 2), half().view(), half().view()).unwrap();
        assert_eq!(out.view(), array![[0.25, 0.25], [0.25, 0.25]].view());
    }

    #[test]
    fn rounding_rejects_mass_mismatch() {
        let err = round_to_polytope(&Coupling::zeros(2, 2), array![0.5, 0.5].view(), array![0.5, 0.6].view());
        assert!(matches!(err, Err(GwError::MassMismatch { .. })));
    }

    #[test]
    fn parameter_validation() {
        let z = Array2::<f64>::zeros((2, 2));
        assert!(solve_projection_inexact(z.view(), &half(), &half(), -1.0, &DualVector::zeros(2, 2)).is_err());
        assert!(solve_projection_inexact(z.view(), &half(), &half(), 1.0, &DualVector::zeros(3, 2)).is_err());
        assert!(solve_projection_exact(z.view(), &half(), &half(), 0.0).is_err());
    }
}
