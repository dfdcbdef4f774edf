//! Binary instance container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "GWAI1"                 5 bytes
//! n                       u64
//! adjacency_1             n*n f64, row-major
//! adjacency_2             n*n f64
//! c1                      n*n f64
//! c2                      n*n f64
//! perm_true               n u64
//! p_edge, eta             f64, f64
//! seed                    u64
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use gwot_core::graph_align::{check_permutation, derive_seed, make_instance, Adjacency, AlignmentInstance};
use gwot_core::{CostMatrix, Marginals};
use ndarray::Array2;

use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result};

pub const MAGIC: &[u8; 5] = b"GWAI1";
pub const HEADER_BYTES: usize = MAGIC.len() + 8;
pub const METADATA_BYTES: usize = 24;

/// Exact size of the file holding an instance with `n` nodes.
pub fn file_size(n: usize) -> usize {
    HEADER_BYTES + 8 * (4 * n * n + n) + METADATA_BYTES
}

pub fn instance_path(dir: &Path, n: usize, index: usize) -> PathBuf {
    dir.join(format!("n{n}_s{index:03}.gwai"))
}

pub fn encode(inst: &AlignmentInstance) -> Vec<u8> {
    let n = inst.n();
    let mut buf = Vec::with_capacity(file_size(n));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for adj in [&inst.adjacency_1, &inst.adjacency_2] {
        for &e in adj.iter() {
            buf.extend_from_slice(&f64::from(e).to_le_bytes());
        }
    }
    for c in [&inst.c1, &inst.c2] {
        for &x in c.view().iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    for &j in &inst.perm_true {
        buf.extend_from_slice(&(j as u64).to_le_bytes());
    }
    buf.extend_from_slice(&inst.p_edge.to_le_bytes());
    buf.extend_from_slice(&inst.eta.to_le_bytes());
    buf.extend_from_slice(&inst.seed.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn word(&mut self) -> [u8; 8] {
        let w = self.bytes[self.pos..self.pos + 8].try_into().unwrap();
        self.pos += 8;
        w
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.word())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.word())
    }

    fn matrix(&mut self, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |_| self.f64())
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<AlignmentInstance, String> {
    if bytes.len() < HEADER_BYTES || &bytes[..MAGIC.len()] != MAGIC {
        return Err("bad magic string".into());
    }
    let mut r = Reader { bytes, pos: MAGIC.len() };
    let n = usize::try_from(r.u64()).map_err(|_| "node count overflows".to_string())?;
    let expected = n.checked_mul(n).and_then(|nn| nn.checked_mul(32)).and_then(|x| x.checked_add(8 * n + HEADER_BYTES + METADATA_BYTES));
    if expected != Some(bytes.len()) {
        return Err(format!("{} bytes for n = {n}, expected {}", bytes.len(), expected.map_or("overflow".into(), |e| e.to_string())));
    }

    let adjacency = |r: &mut Reader| -> std::result::Result<Adjacency, String> {
        let m = r.matrix(n);
        if let Some(x) = m.iter().find(|x| **x != 0.0 && **x != 1.0) {
            return Err(format!("adjacency entry {x} is not 0 or 1"));
        }
        Ok(m.mapv(|x| x as u8))
    };
    let adjacency_1 = adjacency(&mut r)?;
    let adjacency_2 = adjacency(&mut r)?;
    let c1 = CostMatrix::new(r.matrix(n)).map_err(|e| e.to_string())?;
    let c2 = CostMatrix::new(r.matrix(n)).map_err(|e| e.to_string())?;
    let perm_true: Vec<usize> = (0..n).map(|_| r.u64() as usize).collect();
    check_permutation(&perm_true).map_err(|e| e.to_string())?;
    let p_edge = r.f64();
    let eta = r.f64();
    let seed = r.u64();
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

pub fn save_instance(path: &Path, inst: &AlignmentInstance) -> Result<()> {
    fs::write(path, encode(inst)).map_err(io_err(path))
}

pub fn load_instance(path: &Path) -> Result<AlignmentInstance> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode(&bytes).map_err(|reason| CliError::Format { path: path.to_owned(), reason })
}

/// Builds the instance for `(n, index)` exactly as `generate` would.
pub fn build_instance(config: &RunConfig, n: usize, index: usize) -> Result<AlignmentInstance> {
    Ok(make_instance(n, config.p_edge, config.eta, derive_seed(config.base_seed, n, index))?)
}

pub fn instance_dir(config: &RunConfig) -> PathBuf {
    config.output_dir.join("instances")
}

/// Writes one file per (size, seed index); rerunning overwrites the same bytes.
pub fn cmd_generate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let dir = instance_dir(config);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut written = Vec::new();
    for &n in &config.sizes {
        for index in 0..config.seeds {
            let path = instance_path(&dir, n, index);
            save_instance(&path, &build_instance(config, n, index)?)?;
            log::debug!("wrote {}", path.display());
            written.push(path);
        }
    }
    Ok(written)
}
