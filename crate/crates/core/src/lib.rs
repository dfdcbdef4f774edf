//! Squared-loss Gromov-Wasserstein transport: an inexact projected gradient
//! solver, comparison baselines and a graph alignment benchmark harness.

// parameter checks are written `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod graph_align;
pub mod gw;
pub mod ipg;
pub mod polytope;
pub mod trace;

pub use error::{GwError, Result};
pub use gw::{
    apply_a, apply_a_adjoint, energy_constant, gw_energy, gw_gradient, gw_quadratic, lipschitz_bound, spectral_norm,
    ConstraintImage, CostMatrix, Coupling, LipschitzBound, Marginals, SpectralEstimate,
};
pub use ipg::{ipg_solve, tolerance_schedule, IpgConfig, IpgDiagnostics, IpgOutput};
pub use polytope::{round_to_polytope, solve_projection_exact, solve_projection_inexact, DualVector, ProjectionResult};
pub use trace::{IterationRecord, SolveStatus, SolverOutput, SolverTrace};
