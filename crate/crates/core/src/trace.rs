//! Per-iteration records shared by every solver.

use crate::gw::Coupling;

/// One outer step `k -> k + 1`.
///
/// Quantities describing the current iterate (`f_value`, `energy`, the shadow
/// fields) refer to `P^k`; quantities describing the step (`residual_l2`,
/// `eps_k`, `dual_norm`, `inner_iterations`, `successive_change`) refer to the
/// new iterate `P^{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Quadratic part of the objective at `P^k`.
    pub f_value: f64,
    /// Full squared-loss energy at `P^k`.
    pub energy: f64,
    /// `||A P^{k+1} - r||_2`.
    pub residual_l2: f64,
    /// Tolerance the inner solve had to meet (inexact projected gradient only).
    pub eps_k: Option<f64>,
    /// `||y^{k+1}||_2` of the accepted dual iterate (inexact projected gradient only).
    pub dual_norm: Option<f64>,
    pub inner_iterations: usize,
    /// `||P^{k+1} - P^k||_F`.
    pub successive_change: f64,
    /// Quadratic objective at the rounded (feasible) companion of `P^k`.
    pub shadow_f: Option<f64>,
    /// `||round(P^k) - P^k||_F`.
    pub shadow_distance: Option<f64>,
    /// Wall-clock seconds since the solve started, taken after this step.
    pub elapsed_s: f64,
}

impl IterationRecord {
    /// Whether `residual_l2 * (1 + dual_norm) <= eps_k`; `None` for solvers
    /// without an inexact projection.
    pub fn inexact_condition_holds(&self) -> Option<bool> {
        match (self.eps_k, self.dual_norm) {
            (Some(eps), Some(y)) => Some(self.residual_l2 * (1.0 + y) <= eps),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    InnerFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::InnerFailure => "inner_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub status: SolveStatus,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// Final coupling plus the trace of the run that produced it.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub coupling: Coupling,
    pub trace: SolverTrace,
}
