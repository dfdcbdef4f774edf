use std::io::{Read, Write};
use std::path::Path;

use gwot_core::graph_align::RunStatus;

use crate::config::Method;
use crate::error::{csv_err, CliError, Result};

pub const HEADER: [&str; 11] =
    ["method", "epsilon", "n", "seed", "loss", "sparsity", "feasibility", "accuracy", "time_s", "iters", "status"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    pub sparsity: f64,
    pub feasibility: f64,
    pub accuracy: f64,
    pub time_s: f64,
    pub iters: usize,
}

/// One solver run. `metrics` is `None` exactly when the run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub epsilon: Option<f64>,
    pub n: usize,
    /// Seed index within the size, not the derived generator seed.
    pub seed: usize,
    pub metrics: Option<Metrics>,
    pub status: RunStatus,
}

impl ResultRow {
    fn record(&self) -> Vec<String> {
        // `{}` on f64 prints the shortest string that parses back to the same value
        let mut rec = vec![
            self.method.to_string(),
            self.epsilon.map(|e| e.to_string()).unwrap_or_default(),
            self.n.to_string(),
            self.seed.to_string(),
        ];
        match &self.metrics {
            Some(m) => rec.extend([
                m.loss.to_string(),
                m.sparsity.to_string(),
                m.feasibility.to_string(),
                m.accuracy.to_string(),
                m.time_s.to_string(),
                m.iters.to_string(),
            ]),
            None => rec.extend((0..6).map(|_| String::new())),
        }
        rec.push(self.status.as_str().to_string());
        rec
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.record()).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::Io { path: path.to_owned(), source: e })
}

pub fn read_rows<R: Read>(input: R, path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers().map_err(csv_err(path))?;
    if header.iter().ne(HEADER) {
        return Err(CliError::Results { path: path.to_owned(), line: 1, reason: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        let fail = |reason: String| CliError::Results { path: path.to_owned(), line, reason };
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let float = |i: usize| field(i).parse::<f64>().map_err(|e| fail(format!("column {}: {e}", HEADER[i])));
        let int = |i: usize| field(i).parse::<usize>().map_err(|e| fail(format!("column {}: {e}", HEADER[i])));

        let method = field(0).parse::<Method>().map_err(|e| fail(e.to_string()))?;
        let epsilon = if field(1).is_empty() { None } else { Some(float(1)?) };
        let status = RunStatus::parse(field(10)).ok_or_else(|| fail(format!("unknown status `{}`", field(10))))?;
        let metrics = if (4..10).all(|i| field(i).is_empty()) {
            None
        } else {
            Some(Metrics {
                loss: float(4)?,
                sparsity: float(5)?,
                feasibility: float(6)?,
                accuracy: float(7)?,
                time_s: float(8)?,
                iters: int(9)?,
            })
        };
        if metrics.is_none() != (status == RunStatus::Failed) {
            return Err(fail("metrics must be empty exactly for failed runs".into()));
        }
        rows.push(ResultRow { method, epsilon, n: int(2)?, seed: int(3)?, metrics, status });
    }
    Ok(rows)
}

pub fn read_results_file(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io { path: path.to_owned(), source: e })?;
    read_rows(std::io::BufReader::new(file), path)
}
