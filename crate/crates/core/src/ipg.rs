//! Inexact projected gradient for squared-loss Gromov-Wasserstein.
//!
//! Each outer step moves along `-grad f` with step `1/gamma` (`gamma > L_f`)
//! and projects back onto `U(a, b)` only approximately: the inner dual solve
//! stops once `||A P^{k+1} - r||_2 <= eps_k / (1 + ||y^{k+1}||_2)` with the
//! summable schedule `eps_k = scale * (k + 1)^(-alpha)`.

use std::time::Instant;

use ndarray::{Array2, Zip};

use crate::error::{GwError, Result};
use crate::gw::{
    apply_a, check_problem, energy_constant, frobenius, gradient_view, lipschitz_bound, quadratic_view, Coupling, CostMatrix,
    Marginals,
};
use crate::polytope::{round_to_polytope, solve_projection_exact, solve_projection_inexact, DualVector};
use crate::trace::{IterationRecord, SolveStatus, SolverTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct IpgConfig {
    /// `gamma = gamma_factor * L_f`; must exceed 1.
    pub gamma_factor: f64,
    /// Decay exponent of the tolerance schedule; must exceed 1.
    pub alpha: f64,
    pub eps_scale: f64,
    pub max_iter: usize,
    /// Stop once `||P^{k+1} - P^k||_F / max(1, ||P^k||_F) <= rel_tol`.
    pub rel_tol: f64,
    /// Round every iterate and record the objective of the feasible companion.
    pub record_shadow: bool,
}

impl Default for IpgConfig {
    fn default() -> Self {
        Self {
            gamma_factor: 1.01,
            alpha: 3.0,
            eps_scale: 1.0,
            max_iter: 5000,
            rel_tol: 1e-9,
            record_shadow: false,
        }
    }
}

impl IpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(GwError::InvalidParameter { name, reason: reason.to_string() });
        if !(self.gamma_factor > 1.0) {
            return bad("gamma_factor", "must be > 1 so that gamma > L_f");
        }
        if !(self.alpha > 1.0) {
            return bad("alpha", "must be > 1 for a summable schedule");
        }
        if !(self.eps_scale > 0.0) {
            return bad("eps_scale", "must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be >= 1");
        }
        if !(self.rel_tol >= 0.0) {
            return bad("rel_tol", "must be >= 0");
        }
        Ok(())
    }
}

/// `eps_k = eps_scale * (k + 1)^(-alpha)`.
pub fn tolerance_schedule(k: usize, alpha: f64, eps_scale: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(GwError::InvalidParameter {
            name: "alpha",
            reason: format!("must be > 1 for a summable schedule, got {alpha}"),
        });
    }
    if !(eps_scale > 0.0) {
        return Err(GwError::InvalidParameter { name: "eps_scale", reason: format!("must be > 0, got {eps_scale}") });
    }
    Ok(eps_scale * ((k + 1) as f64).powf(-alpha))
}

/// Upper bound on `sum_{k >= 0} eps_k`: an exact partial sum plus the integral
/// bound on the tail.
pub fn schedule_sum_bound(alpha: f64, eps_scale: f64) -> f64 {
    const HEAD: usize = 10_000;
    let head: f64 = (1..=HEAD).map(|k| (k as f64).powf(-alpha)).sum();
    let tail = (HEAD as f64).powf(1.0 - alpha) / (alpha - 1.0);
    eps_scale * (head + tail)
}

/// Run constants needed to re-check the convergence inequalities from a trace.
#[derive(Debug, Clone)]
pub struct IpgDiagnostics {
    pub gamma: f64,
    pub lipschitz: f64,
    pub lipschitz_converged: bool,
    /// `||A P^0 - r||_2`.
    pub initial_residual: f64,
    /// `initial_residual + sum_k eps_k` (upper bound).
    pub schedule_total: f64,
    /// Quadratic objective of the rounded final iterate (when shadows are recorded).
    pub final_shadow_f: Option<f64>,
    /// Exactly feasible companion of the returned coupling.
    pub rounded: Coupling,
}

#[derive(Debug, Clone)]
pub struct IpgOutput {
    /// Raw final iterate; infeasible by at most the last inner residual.
    pub coupling: Coupling,
    pub trace: SolverTrace,
    pub diagnostics: IpgDiagnostics,
}

/// Step size parameter: `gamma_factor * L_f`, with `L_f` floored at 1 when
/// both costs vanish (then `grad f == 0` and any positive gamma works).
fn step_gamma(lipschitz: f64, gamma_factor: f64) -> f64 {
    if lipschitz > 0.0 {
        gamma_factor * lipschitz
    } else {
        gamma_factor
    }
}

/// Runs the inexact projected gradient method from `pi0`.
pub fn ipg_solve(
    c1: &CostMatrix,
    c2: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    pi0: &Coupling,
    config: &IpgConfig,
) -> Result<IpgOutput> {
    config.validate()?;
    check_problem(c1, c2, a, b, pi0)?;
    let (n, m) = pi0.dim();
    let start = Instant::now();

    let lip = lipschitz_bound(c1, c2);
    let gamma = step_gamma(lip.value, config.gamma_factor);
    let constant = energy_constant(c1, c2, a, b)?;
    let initial_residual = apply_a(pi0.view()).residual(a.view(), b.view());
    let schedule_total = initial_residual + schedule_sum_bound(config.alpha, config.eps_scale);

    let shadow = |pi: &Array2<f64>| -> Result<(f64, f64)> {
        let rounded = round_to_polytope(&Coupling::from_nonnegative(pi.clone()), a.view(), b.view())?;
        let dist = frobenius((&rounded.view() - pi).view());
        Ok((quadratic_view(rounded.view(), c1, c2)?, dist))
    };

    let mut pi = pi0.view().to_owned();
    let mut dual = DualVector::zeros(n, m);
    let mut records = Vec::with_capacity(config.max_iter.min(1024));
    let mut status = SolveStatus::MaxIter;

    for k in 0..config.max_iter {
        let grad = gradient_view(pi.view(), c1, c2)?;
        // <grad f(P), P> = 2 f(P)
        let f_value = 0.5 * Zip::from(&grad).and(&pi).fold(0.0, |acc, g, p| acc + g * p);
        let (shadow_f, shadow_distance) = if config.record_shadow {
            let (sf, sd) = shadow(&pi)?;
            (Some(sf), Some(sd))
        } else {
            (None, None)
        };

        let mut z = grad;
        z.zip_mut_with(&pi, |g, p| *g = p - *g / gamma);
        let eps_k = tolerance_schedule(k, config.alpha, config.eps_scale)?;
        let proj = solve_projection_inexact(z.view(), a, b, eps_k, &dual)?;

        let next = proj.coupling.into_inner();
        let change = frobenius((&next - &pi).view());
        let scale = frobenius(pi.view()).max(1.0);
        records.push(IterationRecord {
            k,
            f_value,
            energy: constant + 2.0 * f_value,
            residual_l2: proj.residual_l2,
            eps_k: Some(eps_k),
            dual_norm: Some(proj.dual.norm()),
            inner_iterations: proj.inner_iterations,
            successive_change: change,
            shadow_f,
            shadow_distance,
            elapsed_s: start.elapsed().as_secs_f64(),
        });

        if !proj.converged {
            log::warn!(
                "inner projection hit {} iterations at outer step {k} (residual {:e}, eps {:e})",
                proj.inner_iterations,
                proj.residual_l2,
                eps_k
            );
            status = SolveStatus::InnerFailure;
            break;
        }
        pi = next;
        dual = proj.dual;
        if change / scale <= config.rel_tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    let coupling = Coupling::from_nonnegative(pi);
    let rounded = round_to_polytope(&coupling, a.view(), b.view())?;
    let final_shadow_f = if config.record_shadow {
        Some(quadratic_view(rounded.view(), c1, c2)?)
    } else {
        None
    };
    Ok(IpgOutput {
        coupling,
        trace: SolverTrace { records, status },
        diagnostics: IpgDiagnostics {
            gamma,
            lipschitz: lip.value,
            lipschitz_converged: lip.converged,
            initial_residual,
            schedule_total,
            final_shadow_f,
            rounded,
        },
    })
}

/// One evaluation of the approximate sufficient descent inequality
/// `f(round(P^{k+1})) <= f(round(P^k)) + xi_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentCheck {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub xi: f64,
}

impl DescentCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// `xi_k = 4 gamma (m+n) (eps_{k-1}^2 + eps_k^2) + (6E + 4) 2 gamma (m+n) eps_k`.
pub fn descent_slack(gamma: f64, dims_sum: usize, eps_prev: f64, eps_k: f64, schedule_total: f64) -> f64 {
    let mn = dims_sum as f64;
    4.0 * gamma * mn * (eps_prev * eps_prev + eps_k * eps_k) + (6.0 * schedule_total + 4.0) * 2.0 * gamma * mn * eps_k
}

/// Evaluates the descent inequality at every recorded step. Requires a run
/// with `record_shadow` set; returns an empty list otherwise.
pub fn approximate_descent_checks(output: &IpgOutput) -> Vec<DescentCheck> {
    let (n, m) = output.coupling.dim();
    let diag = &output.diagnostics;
    let records = &output.trace.records;
    let mut checks = Vec::with_capacity(records.len());
    for (idx, rec) in records.iter().enumerate() {
        let (Some(current), Some(eps_k)) = (rec.shadow_f, rec.eps_k) else {
            return Vec::new();
        };
        let next = match records.get(idx + 1) {
            Some(r) => r.shadow_f,
            None if output.trace.status == SolveStatus::InnerFailure => None,
            None => diag.final_shadow_f,
        };
        let Some(next) = next else { break };
        let eps_prev = if idx == 0 { diag.initial_residual } else { records[idx - 1].eps_k.unwrap_or(0.0) };
        let xi = descent_slack(diag.gamma, n + m, eps_prev, eps_k, diag.schedule_total);
        checks.push(DescentCheck { k: rec.k, lhs: next, rhs: current + xi, xi });
    }
    checks
}

/// Fixed-point residual of the exact projected gradient map:
/// `||P - Proj_U(P - grad f(P) / gamma)||_F`.
pub fn stationarity_measure(
    pi: &Coupling,
    c1: &CostMatrix,
    c2: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(GwError::InvalidParameter { name: "gamma", reason: format!("must be > 0, got {gamma}") });
    }
    check_problem(c1, c2, a, b, pi)?;
    let mut z = gradient_view(pi.view(), c1, c2)?;
    z.zip_mut_with(&pi.view(), |g, p| *g = p - *g / gamma);
    let exact = solve_projection_exact(z.view(), a, b, 1e-12)?;
    Ok(frobenius((&pi.view() - &exact.coupling.view()).view()))
}
