use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gwot_core::graph_align::RunStatus;

use crate::config::Method;
use crate::error::{csv_err, io_err, CliError, Result};
use crate::results::{read_results_file, ResultRow};

pub const SUMMARY_HEADER: [&str; 12] =
    ["method", "epsilon", "n", "runs", "failed", "max_iter", "loss", "sparsity", "feasibility", "accuracy", "time_s", "iters"];

/// Averages over the completed runs of one (method, epsilon, n) group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Means {
    pub loss: f64,
    pub sparsity: f64,
    pub feasibility: f64,
    pub accuracy: f64,
    pub time_s: f64,
    pub iters: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub epsilon: Option<f64>,
    pub n: usize,
    pub runs: usize,
    pub failed: usize,
    /// Completed runs that stopped on the iteration cap.
    pub max_iter: usize,
    /// `None` when every run of the group failed.
    pub means: Option<Means>,
}

/// Groups rows by (method, epsilon, n) in order of first appearance. Every
/// row that is not `failed` carries metrics and counts toward the means.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let key = |r: &ResultRow| (r.method, r.epsilon.map(f64::to_bits), r.n);
    let mut keys = Vec::new();
    for r in rows {
        if !keys.contains(&key(r)) {
            keys.push(key(r));
        }
    }
    keys.into_iter()
        .map(|k| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| key(r) == k).collect();
            let done: Vec<_> = group.iter().filter_map(|r| r.metrics).collect();
            let means = (!done.is_empty()).then(|| {
                let mean = |f: &dyn Fn(&crate::results::Metrics) -> f64| done.iter().map(f).sum::<f64>() / done.len() as f64;
                Means {
                    loss: mean(&|m| m.loss),
                    sparsity: mean(&|m| m.sparsity),
                    feasibility: mean(&|m| m.feasibility),
                    accuracy: mean(&|m| m.accuracy),
                    time_s: mean(&|m| m.time_s),
                    iters: mean(&|m| m.iters as f64),
                }
            });
            SummaryRow {
                method: k.0,
                epsilon: k.1.map(f64::from_bits),
                n: k.2,
                runs: group.len(),
                failed: group.iter().filter(|r| r.status == RunStatus::Failed).count(),
                max_iter: group.iter().filter(|r| r.status == RunStatus::MaxIter).count(),
                means,
            }
        })
        .collect()
}

fn eps_label(e: Option<f64>) -> String {
    e.map(|e| e.to_string()).unwrap_or_default()
}

pub fn write_summary_csv<W: std::io::Write>(out: W, summary: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for s in summary {
        let mut rec =
            vec![s.method.to_string(), eps_label(s.epsilon), s.n.to_string(), s.runs.to_string(), s.failed.to_string(), s.max_iter.to_string()];
        match &s.means {
            Some(m) => rec.extend([m.loss, m.sparsity, m.feasibility, m.accuracy, m.time_s, m.iters].map(|x| x.to_string())),
            None => rec.extend((0..6).map(|_| "-".to_string())),
        }
        w.write_record(rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Fixed-width table with the rounding used in published result tables.
pub fn render_text(summary: &[SummaryRow]) -> String {
    let header = ["method", "epsilon", "n", "runs", "failed", "max_iter", "loss", "sparsity", "feasibility", "accuracy", "time_s", "iters"];
    let cells: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            let mut row = vec![
                s.method.to_string(),
                s.epsilon.map_or("-".into(), |e| format!("{e:.0e}")),
                s.n.to_string(),
                s.runs.to_string(),
                s.failed.to_string(),
                s.max_iter.to_string(),
            ];
            match &s.means {
                Some(m) => row.extend([
                    format!("{:.2e}", m.loss),
                    format!("{:.2}", m.sparsity),
                    format!("{:.2e}", m.feasibility),
                    format!("{:.2}", m.accuracy),
                    format!("{:.2}", m.time_s),
                    format!("{:.0}", m.iters),
                ]),
                None => row.extend((0..6).map(|_| "-".to_string())),
            }
            row
        })
        .collect();
    let widths: Vec<usize> =
        (0..header.len()).map(|i| cells.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap()).collect();
    let mut text = String::new();
    let mut line = |fields: &[&str]| {
        let padded: Vec<String> = fields.iter().zip(&widths).map(|(f, w)| format!("{f:>w$}")).collect();
        writeln!(text, "{}", padded.join("  ").trim_end()).unwrap();
    };
    line(&header);
    for row in &cells {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    text
}

/// Reads a results file and writes `summary.csv` and `summary.txt` into
/// `out_dir`. Returns the text rendering.
pub fn cmd_summarize(results: &Path, out_dir: &Path) -> Result<(Vec<SummaryRow>, String)> {
    let rows = read_results_file(results)?;
    if rows.is_empty() {
        return Err(CliError::Results { path: results.to_owned(), line: 1, reason: "no result rows".into() });
    }
    let summary = summarize(&rows);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path: PathBuf = out_dir.join("summary.csv");
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_summary_csv(std::io::BufWriter::new(file), &summary, &csv_path)?;
    let text = render_text(&summary);
    let txt_path = out_dir.join("summary.txt");
    fs::write(&txt_path, &text).map_err(io_err(&txt_path))?;
    Ok((summary, text))
}
