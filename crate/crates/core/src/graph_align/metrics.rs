use ndarray::Axis;

use super::generate::AlignmentInstance;
use super::hungarian::hungarian_round;
use crate::error::{dim_mismatch, Result};
use crate::gw::{gw_energy, Coupling};
use crate::trace::SolveStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunStatus {
    Ok,
    MaxIter,
    InnerFailure,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::MaxIter => "max_iter",
            RunStatus::InnerFailure => "inner_failure",
            RunStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => RunStatus::Ok,
            "max_iter" => RunStatus::MaxIter,
            "inner_failure" => RunStatus::InnerFailure,
            "failed" => RunStatus::Failed,
            _ => return None,
        })
    }
}

impl From<SolveStatus> for RunStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Converged => RunStatus::Ok,
            SolveStatus::MaxIter => RunStatus::MaxIter,
            SolveStatus::InnerFailure => RunStatus::InnerFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    /// Squared-loss GW energy of the returned coupling.
    pub loss: f64,
    /// Fraction of entries counted as zero.
    pub sparsity: f64,
    /// `||P 1 - p||_2 + ||P^T 1 - q||_2`.
    pub feasibility: f64,
    /// Fraction of nodes whose rounded match is the planted one.
    pub accuracy: f64,
    pub time_s: f64,
    pub iters: usize,
    pub status: RunStatus,
}

/// Fraction of indices where two assignments agree.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Fraction of entries with `|P_ij| <= threshold` (exact zeros for 0).
pub fn sparsity(pi: &Coupling, threshold: f64) -> f64 {
    let v = pi.view();
    let zeros = v.iter().filter(|x| x.abs() <= threshold).count();
    zeros as f64 / v.len().max(1) as f64
}

pub fn evaluate(
    pi: &Coupling,
    instance: &AlignmentInstance,
    elapsed_s: f64,
    iters: usize,
    status: RunStatus,
) -> Result<MetricsRecord> {
    evaluate_with_threshold(pi, instance, elapsed_s, iters, status, 0.0)
}

pub fn evaluate_with_threshold(
    pi: &Coupling,
    instance: &AlignmentInstance,
    elapsed_s: f64,
    iters: usize,
    status: RunStatus,
    zero_threshold: f64,
) -> Result<MetricsRecord> {
    let n = instance.n();
    if pi.dim() != (n, n) {
        return Err(dim_mismatch("evaluate", format!("{n}x{n}"), format!("{:?}", pi.dim())));
    }
    let v = pi.view();
    let rows = v.sum_axis(Axis(1));
    let cols = v.sum_axis(Axis(0));
    let dist = |s: &ndarray::Array1<f64>, t: &[f64]| s.iter().zip(t).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let feasibility = dist(&rows, instance.p.as_slice()) + dist(&cols, instance.q.as_slice());
    let predicted = hungarian_round(pi)?;
    Ok(MetricsRecord {
        loss: gw_energy(pi, &instance.c1, &instance.c2, &instance.p, &instance.q)?,
        sparsity: sparsity(pi, zero_threshold),
        feasibility,
        accuracy: accuracy(&predicted, &instance.perm_true),
        time_s: elapsed_s,
        iters,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_align::make_instance;
    use crate::gw::Marginals;
    use ndarray::array;

    #[test]
    fn planted_coupling_on_clean_instance() {
        let inst = make_instance(12, 0.3, 0.0, 5).unwrap();
        let pi = Coupling::from_permutation(&inst.perm_true);
        let m = evaluate(&pi, &inst, 0.0, 1, RunStatus::Ok).unwrap();
        assert!(m.loss.abs() < 1e-15);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.feasibility, 0.0);
    }

    #[test]
    fn sparsity_examples() {
        let h = Marginals::uniform(2);
        assert_eq!(sparsity(&Coupling::product(&h, &h), 0.0), 0.0);
        assert_eq!(sparsity(&Coupling::new(array![[0.5, 0.0], [0.0, 0.5]]).unwrap(), 0.0), 0.5);
        assert_eq!(sparsity(&Coupling::new(array![[0.5, 1e-20], [1e-20, 0.5]]).unwrap(), 1e-12), 0.5);
    }

    #[test]
    fn status_round_trip() {
        for s in [RunStatus::Ok, RunStatus::MaxIter, RunStatus::InnerFailure, RunStatus::Failed] {
            assert_eq!(RunStatus::parse(s.as_str()), Some(s));
        }
        assert_eq!(RunStatus::parse("bogus"), None);
    }
}
