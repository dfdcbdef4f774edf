use std::collections::VecDeque;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_mismatch, GwError, Result};
use crate::gw::{CostMatrix, Marginals};

/// Symmetric 0/1 adjacency matrix with zero diagonal.
pub type Adjacency = Array2<u8>;

/// Resampling cap for connectivity rejection.
pub const MAX_RESAMPLES: usize = 1000;

/// SplitMix64 finaliser.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the `index`-th instance of size `n` in a sweep rooted at `base_seed`.
pub fn derive_seed(base_seed: u64, n: usize, index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ n as u64) ^ index as u64)
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn is_connected(adj: &Adjacency) -> bool {
    let n = adj.nrows();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for (j, &e) in adj.row(i).iter().enumerate() {
            if e != 0 && !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

fn check_probability(name: &'static str, p: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { (0.0..1.0).contains(&p) } else { p > 0.0 && p < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(GwError::InvalidParameter { name, reason: format!("{p} is outside the allowed range") })
    }
}

/// Connected Erdos-Renyi graph `G(n, p_edge)`, resampled until connected.
pub fn gen_er_connected(n: usize, p_edge: f64, seed: u64) -> Result<Adjacency> {
    check_probability("p_edge", p_edge, false)?;
    if n < 2 {
        return Err(GwError::InvalidParameter { name: "n", reason: format!("need at least 2 nodes, got {n}") });
    }
    let mut rng = rng_for(seed);
    for _ in 0..MAX_RESAMPLES {
        let mut adj = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p_edge) {
                    adj[[i, j]] = 1;
                    adj[[j, i]] = 1;
                }
            }
        }
        if is_connected(&adj) {
            return Ok(adj);
        }
    }
    Err(GwError::ResampleLimit { attempts: MAX_RESAMPLES, what: "connected Erdos-Renyi graph" })
}

pub fn check_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(GwError::InvalidPermutation(format!("{perm:?} is not a bijection on 0..{}", perm.len())));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Relabels node `i` as `perm[i]`: `out[perm[i]][perm[j]] = adj[i][j]`.
pub fn permute_graph(adj: &Adjacency, perm: &[usize]) -> Result<Adjacency> {
    let n = adj.nrows();
    if perm.len() != n || adj.ncols() != n {
        return Err(dim_mismatch("permute_graph", n, perm.len()));
    }
    check_permutation(perm)?;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[perm[i], perm[j]]] = adj[[i, j]];
        }
    }
    Ok(out)
}

/// Uniformly random permutation of `0..n`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_for(seed));
    perm
}

/// Complements each unordered pair independently with probability `eta`,
/// redrawing until the result is connected.
pub fn flip_noise(adj: &Adjacency, eta: f64, seed: u64) -> Result<Adjacency> {
    check_probability("eta", eta, true)?;
    let n = adj.nrows();
    if eta == 0.0 {
        return Ok(adj.clone());
    }
    let mut rng = rng_for(seed);
    for _ in 0..MAX_RESAMPLES {
        let mut out = adj.clone();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(eta) {
                    let e = 1 - out[[i, j]];
                    out[[i, j]] = e;
                    out[[j, i]] = e;
                }
            }
        }
        if is_connected(&out) {
            return Ok(out);
        }
    }
    Err(GwError::ResampleLimit { attempts: MAX_RESAMPLES, what: "connected noisy graph" })
}

/// Hop distances from every node, divided by the largest one.
pub fn apsp_normalized(adj: &Adjacency) -> Result<CostMatrix> {
    let n = adj.nrows();
    if adj.ncols() != n {
        return Err(dim_mismatch("apsp_normalized", "square adjacency", format!("{}x{}", n, adj.ncols())));
    }
    let neighbours: Vec<Vec<usize>> =
        (0..n).map(|i| adj.row(i).iter().enumerate().filter(|(_, e)| **e != 0).map(|(j, _)| j).collect()).collect();
    let mut dist = Array2::<f64>::zeros((n, n));
    let mut hops = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    let mut max = 0usize;
    for s in 0..n {
        hops.fill(usize::MAX);
        hops[s] = 0;
        queue.push_back(s);
        while let Some(i) = queue.pop_front() {
            for &j in &neighbours[i] {
                if hops[j] == usize::MAX {
                    hops[j] = hops[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        for (t, &h) in hops.iter().enumerate() {
            if h == usize::MAX {
                return Err(GwError::Disconnected);
            }
            dist[[s, t]] = h as f64;
            max = max.max(h);
        }
    }
    if max > 0 {
        let scale = max as f64;
        dist.mapv_inplace(|d| d / scale);
    }
    CostMatrix::new(dist)
}

/// Graph pair with a hidden node correspondence `i -> perm_true[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentInstance {
    pub adjacency_1: Adjacency,
    pub adjacency_2: Adjacency,
    pub perm_true: Vec<usize>,
    pub c1: CostMatrix,
    pub c2: CostMatrix,
    pub p: Marginals,
    pub q: Marginals,
    pub p_edge: f64,
    pub eta: f64,
    pub seed: u64,
}

impl AlignmentInstance {
    /// Rebuilds an instance from stored graphs, recomputing the costs.
    pub fn from_graphs(
        adjacency_1: Adjacency,
        adjacency_2: Adjacency,
        perm_true: Vec<usize>,
        p_edge: f64,
        eta: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = adjacency_1.nrows();
        if adjacency_2.dim() != (n, n) || adjacency_1.ncols() != n || perm_true.len() != n {
            return Err(dim_mismatch("alignment instance", n, perm_true.len()));
        }
        check_permutation(&perm_true)?;
        let c1 = apsp_normalized(&adjacency_1)?;
        let c2 = apsp_normalized(&adjacency_2)?;
        Ok(AlignmentInstance {
            adjacency_1,
            adjacency_2,
            perm_true,
            c1,
            c2,
            p: Marginals::uniform(n),
            q: Marginals::uniform(n),
            p_edge,
            eta,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.perm_true.len()
    }
}

/// Graph, hidden relabelling and edge noise each draw from their own stream
/// derived from `seed`.
pub fn make_instance(n: usize, p_edge: f64, eta: f64, seed: u64) -> Result<AlignmentInstance> {
    let g1 = gen_er_connected(n, p_edge, splitmix64(seed ^ 0x01))?;
    let perm = random_permutation(n, splitmix64(seed ^ 0x02));
    let clean = permute_graph(&g1, &perm)?;
    let g2 = flip_noise(&clean, eta, splitmix64(seed ^ 0x03))?;
    AlignmentInstance::from_graphs(g1, g2, perm, p_edge, eta, seed)
}
