//! Conditional gradient (Frank-Wolfe) with exact line search.

use std::time::Instant;

use ndarray::Zip;

use super::network_simplex::ot_network_simplex;
use crate::error::{GwError, Result};
use crate::gw::{apply_a, check_problem, energy_constant, frobenius, gradient_view, quadratic_view, Coupling, CostMatrix, Marginals};
use crate::trace::{IterationRecord, SolveStatus, SolverOutput, SolverTrace};

/// Feasibility demanded of the starting point.
const START_FEASIBILITY_TOL: f64 = 1e-9;

fn inner(x: ndarray::ArrayView2<f64>, y: ndarray::ArrayView2<f64>) -> f64 {
    Zip::from(x).and(y).fold(0.0, |acc, a, b| acc + a * b)
}

/// Step in `[0, 1]` minimising `q t^2 + l t`.
fn line_search(q: f64, l: f64) -> f64 {
    if q > 0.0 {
        (-l / (2.0 * q)).clamp(0.0, 1.0)
    } else if q + l < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Frank-Wolfe on `f` over `U(a, b)`: each step solves the linearised problem
/// exactly with the network simplex and moves toward its vertex. Stops once
/// the gap `<grad f(P), P - S>` is at most `tol`.
pub fn cg_solve(
    c1: &CostMatrix,
    c2: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    pi0: &Coupling,
    max_iter: usize,
    tol: f64,
) -> Result<SolverOutput> {
    check_problem(c1, c2, a, b, pi0)?;
    let start_residual = apply_a(pi0.view()).residual(a.view(), b.view());
    if start_residual > START_FEASIBILITY_TOL {
        return Err(GwError::InvalidCoupling(format!("starting point is infeasible (residual {start_residual:e})")));
    }
    let start = Instant::now();
    let constant = energy_constant(c1, c2, a, b)?;
    let mut pi = pi0.view().to_owned();
    let mut records = Vec::new();
    let mut status = SolveStatus::MaxIter;

    for k in 0..max_iter {
        let grad = gradient_view(pi.view(), c1, c2)?;
        let f_value = 0.5 * inner(grad.view(), pi.view());
        let vertex = ot_network_simplex(grad.view(), a.view(), b.view())?.plan.into_inner();
        let direction = &vertex - &pi;
        let slope = inner(grad.view(), direction.view());
        let gap = -slope;

        let t = if gap <= tol {
            0.0
        } else {
            // f(P + tD) = f(P) + t <grad, D> + t^2 f(D)
            line_search(quadratic_view(direction.view(), c1, c2)?, slope)
        };
        let change = if t > 0.0 {
            if t == 1.0 {
                pi = vertex;
            } else {
                pi.scaled_add(t, &direction);
            }
            t * frobenius(direction.view())
        } else {
            0.0
        };
        records.push(IterationRecord {
            k,
            f_value,
            energy: constant + 2.0 * f_value,
            residual_l2: apply_a(pi.view()).residual(a.view(), b.view()),
            eps_k: None,
            dual_norm: None,
            inner_iterations: 0,
            successive_change: change,
            shadow_f: None,
            shadow_distance: None,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        if gap <= tol || t == 0.0 {
            status = SolveStatus::Converged;
            break;
        }
    }

    Ok(SolverOutput { coupling: Coupling::from_nonnegative(pi), trace: SolverTrace { records, status } })
}
