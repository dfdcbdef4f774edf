//! Graph alignment benchmark: noisy isomorphic Erdos-Renyi pairs, hop-distance
//! costs, assignment rounding and the reported metrics.

mod generate;
mod hungarian;
mod metrics;

pub use generate::{
    apsp_normalized, check_permutation, derive_seed, flip_noise, gen_er_connected, is_connected, make_instance,
    permute_graph, random_permutation, splitmix64, Adjacency, AlignmentInstance, MAX_RESAMPLES,
};
pub use hungarian::{hungarian_round, max_weight_assignment};
pub use metrics::{accuracy, evaluate, evaluate_with_threshold, sparsity, MetricsRecord, RunStatus};
