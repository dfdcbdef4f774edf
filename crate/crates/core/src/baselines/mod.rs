//! Comparison solvers and their transport kernels.

pub mod cg;
pub mod entropic;
pub mod network_simplex;
pub mod sinkhorn;

pub use cg::cg_solve;
pub use entropic::{bapg_solve, epgd_solve, ppa_solve, EntropicConfig};
pub use network_simplex::{ot_network_simplex, ot_network_simplex_with_limit, OtPlan};
pub use sinkhorn::{sinkhorn, sinkhorn_potentials, SinkhornOutput};
