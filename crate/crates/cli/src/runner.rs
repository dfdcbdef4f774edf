use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use gwot_core::baselines::{bapg_solve, cg_solve, epgd_solve, ppa_solve, EntropicConfig};
use gwot_core::graph_align::{derive_seed, evaluate, AlignmentInstance, RunStatus};
use gwot_core::{ipg_solve, Coupling, GwError, IpgConfig, IpgOutput, SolverOutput, SolverTrace};
use rayon::prelude::*;

use crate::config::{Method, RunConfig};
use crate::error::{io_err, CliError, Result};
use crate::instance_io::{build_instance, instance_dir, instance_path, load_instance};
use crate::results::{write_rows, Metrics, ResultRow};

/// One (method, epsilon, size, seed) run of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub epsilon: Option<f64>,
    pub n: usize,
    pub seed: usize,
}

/// Raw solver output, kept so callers can inspect traces.
#[derive(Debug, Clone)]
pub enum RunOutput {
    Ipg(IpgOutput),
    Baseline(SolverOutput),
}

impl RunOutput {
    pub fn coupling(&self) -> &Coupling {
        match self {
            RunOutput::Ipg(o) => &o.coupling,
            RunOutput::Baseline(o) => &o.coupling,
        }
    }

    pub fn trace(&self) -> &SolverTrace {
        match self {
            RunOutput::Ipg(o) => &o.trace,
            RunOutput::Baseline(o) => &o.trace,
        }
    }
}

pub fn ipg_config(config: &RunConfig, record_shadow: bool) -> IpgConfig {
    IpgConfig {
        gamma_factor: config.gamma_factor,
        alpha: config.alpha,
        max_iter: config.max_iter,
        rel_tol: config.tol,
        record_shadow,
        ..IpgConfig::default()
    }
}

pub fn entropic_config(config: &RunConfig, epsilon: f64) -> EntropicConfig {
    EntropicConfig { max_iter: config.max_iter, outer_tol: config.tol, ..EntropicConfig::new(epsilon) }
}

/// Runs one solver from `p q^T`; the returned time covers the solver call only.
pub fn solve(
    method: Method,
    epsilon: Option<f64>,
    inst: &AlignmentInstance,
    config: &RunConfig,
    record_shadow: bool,
) -> gwot_core::Result<(RunOutput, f64)> {
    let (c1, c2, p, q) = (&inst.c1, &inst.c2, &inst.p, &inst.q);
    let pi0 = Coupling::product(p, q);
    let entropic = || {
        epsilon.map(|e| entropic_config(config, e)).ok_or(GwError::InvalidParameter {
            name: "epsilon",
            reason: format!("{method} needs an epsilon"),
        })
    };
    let start = Instant::now();
    let out = match method {
        Method::Ipg => RunOutput::Ipg(ipg_solve(c1, c2, p, q, &pi0, &ipg_config(config, record_shadow))?),
        Method::Cg => RunOutput::Baseline(cg_solve(c1, c2, p, q, &pi0, config.max_iter, config.tol)?),
        Method::Epgd => RunOutput::Baseline(epgd_solve(c1, c2, p, q, &pi0, &entropic()?)?),
        Method::Ppa => RunOutput::Baseline(ppa_solve(c1, c2, p, q, &pi0, &entropic()?)?),
        Method::Bapg => RunOutput::Baseline(bapg_solve(c1, c2, p, q, &pi0, &entropic()?)?),
    };
    let elapsed = start.elapsed().as_secs_f64();
    if out.coupling().view().iter().any(|x| !x.is_finite()) {
        return Err(GwError::Numerical(format!("{method} returned a non-finite coupling")));
    }
    Ok((out, elapsed))
}

/// Turns a finished (or failed) run into its results row.
pub fn row_for(cell: &Cell, inst: &AlignmentInstance, run: &gwot_core::Result<(RunOutput, f64)>, timing: bool) -> ResultRow {
    let failed = |err: &GwError| {
        log::warn!("{} eps={:?} n={} seed={} failed: {err}", cell.method, cell.epsilon, cell.n, cell.seed);
        ResultRow { method: cell.method, epsilon: cell.epsilon, n: cell.n, seed: cell.seed, metrics: None, status: RunStatus::Failed }
    };
    let (out, elapsed) = match run {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let time_s = if timing { *elapsed } else { 0.0 };
    let trace = out.trace();
    let status = RunStatus::from(trace.status);
    match evaluate(out.coupling(), inst, time_s, trace.iterations(), status) {
        Ok(m) => ResultRow {
            method: cell.method,
            epsilon: cell.epsilon,
            n: cell.n,
            seed: cell.seed,
            metrics: Some(Metrics {
                loss: m.loss,
                sparsity: m.sparsity,
                feasibility: m.feasibility,
                accuracy: m.accuracy,
                time_s: m.time_s,
                iters: m.iters,
            }),
            status: m.status,
        },
        Err(e) => failed(&e),
    }
}

/// Loads the persisted instances when present and builds the rest in memory.
/// Instances are ordered by size, then seed index.
pub fn load_or_build_instances(config: &RunConfig) -> Result<Vec<((usize, usize), AlignmentInstance)>> {
    let dir = instance_dir(config);
    let mut out = Vec::new();
    for &n in &config.sizes {
        for index in 0..config.seeds {
            let path = instance_path(&dir, n, index);
            let inst = if path.exists() {
                let stored = load_instance(&path)?;
                let seed = derive_seed(config.base_seed, n, index);
                if stored.n() != n || stored.seed != seed || stored.p_edge != config.p_edge || stored.eta != config.eta {
                    return Err(CliError::Config(format!(
                        "{} was generated with different parameters; rerun `generate` with the same flags",
                        path.display()
                    )));
                }
                stored
            } else {
                build_instance(config, n, index)?
            };
            out.push(((n, index), inst));
        }
    }
    Ok(out)
}

/// Cells in output order: size, then method and epsilon, then seed.
pub fn sweep_cells(config: &RunConfig) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(config.expected_rows());
    for &n in &config.sizes {
        for (method, epsilon) in config.method_cells() {
            cells.extend((0..config.seeds).map(|seed| Cell { method, epsilon, n, seed }));
        }
    }
    cells
}

pub fn run_sweep(config: &RunConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let instances = load_or_build_instances(config)?;
    let lookup = |n: usize, seed: usize| &instances.iter().find(|(key, _)| *key == (n, seed)).unwrap().1;
    let cells = sweep_cells(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", config.jobs)))?;
    // collect keeps cell order regardless of which worker finishes first
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let inst = lookup(cell.n, cell.seed);
                let run = solve(cell.method, cell.epsilon, inst, config, false);
                let row = row_for(cell, inst, &run, !config.no_timing);
                log::info!(
                    "{} eps={} n={} seed={} -> {} ({} iters)",
                    cell.method,
                    cell.epsilon.map_or("-".into(), |e| e.to_string()),
                    cell.n,
                    cell.seed,
                    row.status.as_str(),
                    row.metrics.map_or(0, |m| m.iters)
                );
                row
            })
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

pub fn results_path(config: &RunConfig) -> PathBuf {
    config.output_dir.join("results.csv")
}

/// Runs the whole sweep and writes `results.csv` under the output directory.
pub fn cmd_run(config: &RunConfig) -> Result<PathBuf> {
    let rows = run_sweep(config)?;
    fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let path = results_path(config);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_rows(std::io::BufWriter::new(file), &rows, &path)?;
    Ok(path)
}
