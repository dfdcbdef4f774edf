//! Fixtures shared by the solver benchmarks.

use gwot_core::graph_align::{derive_seed, make_instance, AlignmentInstance};
use gwot_core::Coupling;

/// The benchmark instance family: p_edge 0.2, flip noise 0.1.
pub fn fixture(n: usize) -> AlignmentInstance {
    make_instance(n, 0.2, 0.1, derive_seed(0, n, 0)).expect("benchmark instance")
}

pub fn product_start(inst: &AlignmentInstance) -> Coupling {
    Coupling::product(&inst.p, &inst.q)
}
