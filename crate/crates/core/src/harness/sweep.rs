//! Grid search over stream count, document overlap threshold and pooling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{run_grid_cell, thread_pool};
use super::report::RunReport;
use super::HarnessError;
use crate::io::{write_atomic, write_json};
use crate::model::Pooling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub streams: Vec<usize>,
    pub thresholds: Vec<usize>,
    pub pooling: Vec<Pooling>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { streams: vec![10, 15, 20, 25, 30], thresholds: vec![3, 5, 10, 15], pooling: vec![Pooling::Max, Pooling::Avg, Pooling::Min] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub streams: usize,
    pub threshold: usize,
    pub pooling: Pooling,
    pub parameter_count: usize,
    pub mean_val_accuracy: f64,
    pub mean_test_accuracy: f64,
    pub best_test_accuracy: f64,
    pub runs: Vec<RunReport>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs every grid point for seeds `run.seed .. run.seed + run.repeats`,
/// entirely in memory. Embeddings are trained once per (stream count, seed)
/// and graphs once per (stream count, threshold, seed). Independent
/// (stream count, seed) cells run on `run.threads` workers.
///
/// Entries are ranked by mean validation accuracy, highest first; ties go
/// to the smaller model.
pub fn run_sweep(cfg: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepEntry>, HarnessError> {
    if grid.streams.is_empty() || grid.thresholds.is_empty() || grid.pooling.is_empty() {
        return Err(HarnessError::Config("sweep grid needs at least one value per axis".into()));
    }
    let mut base = cfg.clone();
    base.run.preset = "none".into();
    base.model.streams = None;
    let seeds: Vec<u64> = (0..cfg.run.repeats as u64).map(|i| cfg.run.seed + i).collect();
    let cells: Vec<(usize, u64)> = grid.streams.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
    let pool = thread_pool(cfg.run.threads)?;
    let results = pool.install(|| {
        cells
            .par_iter()
            .map(|&(t, s)| {
                let mut c = base.clone();
                c.embed.dim = t;
                c.run.seed = s;
                run_grid_cell(&c, &grid.thresholds, &grid.pooling).map(|r| (t, r))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut grouped: BTreeMap<(usize, usize, usize), Vec<RunReport>> = BTreeMap::new();
    for (t, reports) in results {
        for (i, r) in reports.into_iter().enumerate() {
            let (ui, pi) = (i / grid.pooling.len(), i % grid.pooling.len());
            grouped.entry((t, ui, pi)).or_default().push(r);
        }
    }
    let mut entries: Vec<SweepEntry> = grouped
        .into_iter()
        .map(|((t, ui, pi), runs)| SweepEntry {
            streams: t,
            threshold: grid.thresholds[ui],
            pooling: grid.pooling[pi],
            parameter_count: runs[0].parameter_count,
            mean_val_accuracy: mean(runs.iter().map(|r| r.val_accuracy)),
            mean_test_accuracy: mean(runs.iter().map(|r| r.test_accuracy)),
            best_test_accuracy: runs.iter().map(|r| r.test_accuracy).fold(f64::NEG_INFINITY, f64::max),
            runs,
        })
        .collect();
    entries.sort_by(|a, b| b.mean_val_accuracy.total_cmp(&a.mean_val_accuracy).then(a.parameter_count.cmp(&b.parameter_count)));

    let out = &cfg.run.out;
    write_json(&out.join("sweep.json"), &entries).map_err(|e| HarnessError::io(out.join("sweep.json"), e))?;
    write_atomic(&out.join("sweep.txt"), sweep_table(&entries).as_bytes()).map_err(|e| HarnessError::io(out.join("sweep.txt"), e))?;
    Ok(entries)
}

/// Ranked table, then the best setting as `# Stream | Document Threshold | Pooling Method | Accuracy`.
pub fn sweep_table(entries: &[SweepEntry]) -> String {
    let mut s = String::new();
    writeln!(s, "{:>4} {:>7} {:>9} {:>7} {:>10} {:>9} {:>9} {:>10}", "rank", "streams", "threshold", "pooling", "params", "val", "test", "best test")
        .unwrap();
    for (i, e) in entries.iter().enumerate() {
        writeln!(
            s,
            "{:>4} {:>7} {:>9} {:>7} {:>10} {:>9.4} {:>9.4} {:>10.4}",
            i + 1,
            e.streams,
            e.threshold,
            format!("{:?}", e.pooling).to_lowercase(),
            e.parameter_count,
            e.mean_val_accuracy,
            e.mean_test_accuracy,
            e.best_test_accuracy
        )
        .unwrap();
    }
    if let Some(best) = entries.first() {
        writeln!(s, "\n# Stream | Document Threshold | Pooling Method | Accuracy").unwrap();
        writeln!(
            s,
            "{} | {} | {} | {:.4}",
            best.streams,
            best.threshold,
            format!("{:?}", best.pooling).to_lowercase(),
            best.mean_test_accuracy
        )
        .unwrap();
    }
    s
}
