//! Entropic baselines: projected gradient with Sinkhorn projections, the
//! entropic proximal point method, and Bregman alternating projected gradient.
//!
//! Linearisations use the gradient of the full squared-loss energy, which is
//! `2 grad f` up to row/column-separable terms that do not change entropic OT
//! solutions.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis, Zip};

use super::sinkhorn::sinkhorn_potentials;
use crate::error::{GwError, Result};
use crate::gw::{apply_a, check_problem, energy_constant, frobenius, gradient_view, Coupling, CostMatrix, Marginals};
use crate::trace::{IterationRecord, SolveStatus, SolverOutput, SolverTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct EntropicConfig {
    pub epsilon: f64,
    /// Outer iterations.
    pub max_iter: usize,
    /// Marginal l1 error at which each Sinkhorn solve stops.
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
    /// Relative successive change `||P^{k+1} - P^k||_F / max(1, ||P^k||_F)`.
    pub outer_tol: f64,
}

impl EntropicConfig {
    pub fn new(epsilon: f64) -> Self {
        EntropicConfig { epsilon, max_iter: 5000, sinkhorn_tol: 1e-9, sinkhorn_max_iter: 1000, outer_tol: 1e-9 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(GwError::InvalidParameter { name: "epsilon", reason: format!("must be positive, got {}", self.epsilon) });
        }
        if !(self.sinkhorn_tol >= 0.0) || !(self.outer_tol >= 0.0) {
            return Err(GwError::InvalidParameter { name: "tol", reason: "tolerances must be nonnegative".into() });
        }
        Ok(())
    }
}

fn check_start(c1: &CostMatrix, c2: &CostMatrix, a: &Marginals, b: &Marginals, pi0: &Coupling) -> Result<()> {
    check_problem(c1, c2, a, b, pi0)?;
    if pi0.view().iter().any(|p| *p <= 0.0) {
        return Err(GwError::InvalidCoupling("entropic solvers need a strictly positive start".into()));
    }
    Ok(())
}

struct Recorder {
    start: Instant,
    constant: f64,
    records: Vec<IterationRecord>,
}

impl Recorder {
    fn new(c1: &CostMatrix, c2: &CostMatrix, a: &Marginals, b: &Marginals) -> Result<Self> {
        Ok(Recorder { start: Instant::now(), constant: energy_constant(c1, c2, a, b)?, records: Vec::new() })
    }

    /// Logs the step `prev -> next` and reports whether the relative change
    /// is below `tol`.
    #[allow(clippy::too_many_arguments)]
    fn step(&mut self, k: usize, grad: &Array2<f64>, prev: &Array2<f64>, next: &Array2<f64>, a: &Marginals, b: &Marginals, inner: usize, tol: f64) -> bool {
        let f_value = 0.5 * Zip::from(grad).and(prev).fold(0.0, |acc, g, p| acc + g * p);
        let change = frobenius((next - prev).view());
        self.records.push(IterationRecord {
            k,
            f_value,
            energy: self.constant + 2.0 * f_value,
            residual_l2: apply_a(next.view()).residual(a.view(), b.view()),
            eps_k: None,
            dual_norm: None,
            inner_iterations: inner,
            successive_change: change,
            shadow_f: None,
            shadow_distance: None,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        });
        change / frobenius(prev.view()).max(1.0) <= tol
    }

    fn finish(self, pi: Array2<f64>, converged: bool) -> SolverOutput {
        let status = if converged { SolveStatus::Converged } else { SolveStatus::MaxIter };
        SolverOutput { coupling: Coupling::from_nonnegative(pi), trace: SolverTrace { records: self.records, status } }
    }
}

/// Flushes subnormal entries to zero, as FTZ hardware modes would; they carry
/// no mass and slow every later product down by orders of magnitude.
fn flush_subnormals(pi: &mut Array2<f64>) {
    pi.mapv_inplace(|p| if p.abs() < f64::MIN_POSITIVE { 0.0 } else { p });
}

fn ensure_finite(pi: &Array2<f64>, method: &str, k: usize) -> Result<()> {
    if pi.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(GwError::Numerical(format!("{method} produced non-finite entries at iteration {k}")))
    }
}

/// Entropic projected gradient: `P <- sinkhorn(grad E(P), eps)`.
pub fn epgd_solve(
    c1: &CostMatrix,
    c2: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    pi0: &Coupling,
    config: &EntropicConfig,
) -> Result<SolverOutput> {
    config.validate()?;
    check_start(c1, c2, a, b, pi0)?;
    let mut rec = Recorder::new(c1, c2, a, b)?;
    let mut pi = pi0.view().to_owned();
    let mut potentials: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut converged = false;

    for k in 0..config.max_iter {
        let grad = gradient_view(pi.view(), c1, c2)?;
        let cost = &grad * 2.0;
        let warm = potentials.as_ref().map(|(f, g)| (f, g));
        let out = sinkhorn_potentials(cost.view(), a.view(), b.view(), config.epsilon, config.sinkhorn_max_iter, config.sinkhorn_tol, warm)?;
        let next = out.plan.into_inner();
        ensure_finite(&next, "epgd", k)?;
        let done = rec.step(k, &grad, &pi, &next, a, b, out.iterations, config.outer_tol);
        potentials = Some((out.f, out.g));
        pi = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(rec.finish(pi, converged))
}

/// Entropic proximal point: `P <- sinkhorn(grad E(P) - eps log P, eps)`, i.e.
/// the Gibbs kernel of the linearisation multiplied entrywise by `P`.
pub fn ppa_solve(
    c1: &CostMatrix,
    c2: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    pi0: &Coupling,
    config: &EntropicConfig,
) -> Result<SolverOutput> {
    config.validate()?;
    check_start(c1, c2, a, b, pi0)?;
    let eps = config.epsilon;
    let mut rec = Recorder::new(c1, c2, a, b)?;
    let mut pi = pi0.view().to_owned();
    let mut potentials: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut converged = false;

    for k in 0..config.max_iter {
        let grad = gradient_view(pi.view(), c1, c2)?;
        let mut cost = &grad * 2.0;
        // log 0 = -inf gives an infinite cost, i.e. the entry stays at zero
        Zip::from(&mut cost).and(&pi).for_each(|c, &p| *c -= eps * p.ln());
        // near a fixed point the scalings of consecutive steps coincide
        let warm = potentials.as_ref().map(|(f, g)| (f, g));
        let out = sinkhorn_potentials(cost.view(), a.view(), b.view(), eps, config.sinkhorn_max_iter, config.sinkhorn_tol, warm)?;
        let next = out.plan.into_inner();
        ensure_finite(&next, "ppa", k)?;
        let done = rec.step(k, &grad, &pi, &next, a, b, out.iterations, config.outer_tol);
        potentials = Some((out.f, out.g));
        pi = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(rec.finish(pi, converged))
}

/// Bregman alternating projected gradient on the relaxed problem: a
/// multiplicative gradient step followed by an exact row rescaling, then a
/// second step followed by an exact column rescaling. Overflow or underflow of
/// a whole row or column is reported as a numerical failure.
pub fn bapg_solve(
    c1: &CostMatrix,
    c2: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    pi0: &Coupling,
    config: &EntropicConfig,
) -> Result<SolverOutput> {
    config.validate()?;
    check_start(c1, c2, a, b, pi0)?;
    let eps = config.epsilon;
    let mut rec = Recorder::new(c1, c2, a, b)?;
    let mut pi = pi0.view().to_owned();
    let mut converged = false;

    for k in 0..config.max_iter {
        let grad = gradient_view(pi.view(), c1, c2)?;
        let mut next = pi.clone();
        Zip::from(&mut next).and(&grad).for_each(|p, &g| *p *= (-g / eps).exp());
        let rows = next.sum_axis(Axis(1));
        for ((mut row, &s), &t) in next.outer_iter_mut().zip(rows.iter()).zip(a.as_slice()) {
            row *= t / s;
        }
        ensure_finite(&next, "bapg", k)?;
        flush_subnormals(&mut next);

        let grad_mid = gradient_view(next.view(), c1, c2)?;
        Zip::from(&mut next).and(&grad_mid).for_each(|p, &g| *p *= (-g / eps).exp());
        let cols = next.sum_axis(Axis(0));
        for (mut col, (&s, &t)) in next.columns_mut().into_iter().zip(cols.iter().zip(b.as_slice())) {
            col *= t / s;
        }
        ensure_finite(&next, "bapg", k)?;
        flush_subnormals(&mut next);

        let done = rec.step(k, &grad, &pi, &next, a, b, 0, config.outer_tol);
        pi = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(rec.finish(pi, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zero_problem(n: usize) -> (CostMatrix, Marginals, Coupling) {
        let h = Marginals::uniform(n);
        let pi0 = Coupling::product(&h, &h);
        (CostMatrix::zeros(n), h, pi0)
    }

    #[test]
    fn zero_costs_are_fixed_points() {
        let (c, h, pi0) = zero_problem(3);
        let cfg = EntropicConfig::new(0.1);
        for solve in [epgd_solve, ppa_solve, bapg_solve] {
            let out = solve(&c, &c, &h, &h, &pi0, &cfg).unwrap();
            assert_eq!(out.trace.status, SolveStatus::Converged);
            assert_eq!(out.trace.iterations(), 1);
            for (x, y) in out.coupling.view().iter().zip(pi0.view().iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_epsilon_and_start() {
        let (c, h, pi0) = zero_problem(2);
        assert!(epgd_solve(&c, &c, &h, &h, &pi0, &EntropicConfig::new(0.0)).is_err());
        let sparse = Coupling::from_permutation(&[0, 1]);
        assert!(matches!(ppa_solve(&c, &c, &h, &h, &sparse, &EntropicConfig::new(1.0)), Err(GwError::InvalidCoupling(_))));
    }
}
