use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Solvers the runner knows how to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ipg,
    Cg,
    Epgd,
    Ppa,
    Bapg,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ipg, Method::Cg, Method::Epgd, Method::Ppa, Method::Bapg];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ipg => "ipg",
            Method::Cg => "cg",
            Method::Epgd => "epgd",
            Method::Ppa => "ppa",
            Method::Bapg => "bapg",
        }
    }

    /// Entropic methods run once per epsilon in the grid.
    pub fn is_entropic(self) -> bool {
        matches!(self, Method::Epgd | Method::Ppa | Method::Bapg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CliError::Config(format!("unknown method `{s}` (expected one of ipg, cg, epgd, ppa, bapg)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sizes: Vec<usize>,
    /// Instances per size.
    pub seeds: usize,
    pub p_edge: f64,
    pub eta: f64,
    pub methods: Vec<Method>,
    pub epsilons: Vec<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub gamma_factor: f64,
    pub alpha: f64,
    pub output_dir: PathBuf,
    pub jobs: usize,
    /// Root of the per-instance seed derivation.
    pub base_seed: u64,
    /// Record `time_s = 0` so repeated runs give identical files.
    pub no_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sizes: vec![100],
            seeds: 20,
            p_edge: 0.2,
            eta: 0.1,
            methods: Method::ALL.to_vec(),
            epsilons: vec![1e-3, 1e-2, 1e-1, 1.0],
            max_iter: 5000,
            tol: 1e-9,
            gamma_factor: 1.01,
            alpha: 3.0,
            output_dir: PathBuf::from("out"),
            jobs: 1,
            base_seed: 0,
            no_timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.seeds == 0 {
            return bad("seeds must be >= 1".into());
        }
        if self.sizes.is_empty() {
            return bad("at least one size is required".into());
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < 2) {
            return bad(format!("size {n} is too small, graphs need at least 2 nodes"));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if !(self.p_edge > 0.0 && self.p_edge <= 1.0) {
            return bad(format!("p_edge must lie in (0, 1], got {}", self.p_edge));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if self.methods.iter().any(|m| m.is_entropic()) && self.epsilons.is_empty() {
            return bad("entropic methods need at least one epsilon".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("epsilon must be positive, got {e}"));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be >= 0, got {}", self.tol));
        }
        if !(self.gamma_factor > 1.0) {
            return bad(format!("gamma_factor must be > 1, got {}", self.gamma_factor));
        }
        if !(self.alpha > 1.0) {
            return bad(format!("alpha must be > 1, got {}", self.alpha));
        }
        if self.jobs == 0 {
            return bad("jobs must be >= 1".into());
        }
        Ok(())
    }

    /// (method, epsilon) pairs in run order; epsilon is `None` for
    /// non-entropic methods.
    pub fn method_cells(&self) -> Vec<(Method, Option<f64>)> {
        let mut cells = Vec::new();
        for &m in &self.methods {
            if m.is_entropic() {
                cells.extend(self.epsilons.iter().map(|&e| (m, Some(e))));
            } else {
                cells.push((m, None));
            }
        }
        cells
    }

    pub fn expected_rows(&self) -> usize {
        self.method_cells().len() * self.sizes.len() * self.seeds
    }
}
