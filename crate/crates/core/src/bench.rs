//! Benchmark sweeps: generate R-MAT inputs, multiply them under a grid of
//! configurations with repetitions, and record one report row per cell.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::buffer::IoSnapshot;
use crate::engine::{multiply, EngineConfig, MultiplyReport, Variant};
use crate::error::{Error, Result};
use crate::rmat::{generate, Benchmark, RmatParams};
use crate::store::{pack_matrix, StoredMatrix};
use crate::verify::file_sha256;

/// One point of a sweep. Every input is squared (`A × A`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchCell {
    pub preset: Benchmark,
    pub scale: u32,
    pub seed: u64,
    pub memory_bytes: u64,
    pub block_size: usize,
    pub threads: usize,
    pub alpha: f64,
    pub variant: Variant,
}

/// Cartesian sweep definition.
#[derive(Debug, Clone)]
pub struct BenchSuite {
    pub preset: Benchmark,
    pub scales: Vec<u32>,
    pub seed: u64,
    pub memories: Vec<u64>,
    pub block_sizes: Vec<usize>,
    pub threads: Vec<usize>,
    pub alphas: Vec<f64>,
    pub variants: Vec<Variant>,
    pub repeat: usize,
    pub work_dir: PathBuf,
}

impl BenchSuite {
    pub fn cells(&self) -> Vec<BenchCell> {
        let mut cells = Vec::new();
        for &scale in &self.scales {
            for &block_size in &self.block_sizes {
                for &memory_bytes in &self.memories {
                    for &threads in &self.threads {
                        for &alpha in &self.alphas {
                            for &variant in &self.variants {
                                cells.push(BenchCell {
                                    preset: self.preset,
                                    scale,
                                    seed: self.seed,
                                    memory_bytes,
                                    block_size,
                                    threads,
                                    alpha,
                                    variant,
                                });
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub cell: BenchCell,
    /// Wall seconds of each repetition.
    pub runs: Vec<f64>,
    pub mean_seconds: f64,
    /// Counters of the last repetition.
    pub io: IoSnapshot,
    pub assigned_blocks: Vec<usize>,
    pub entry_imbalance: f64,
    pub input_entries: u64,
    pub output_entries: u64,
    pub output_sha256: String,
    pub peak_b1_bytes: u64,
    pub peak_b2_bytes: u64,
    pub peak_bout_bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub format: &'static str,
    pub version: u32,
    pub rows: Vec<BenchRow>,
}

type InputKey = (u32, u64, usize);

fn input_key(cell: &BenchCell) -> InputKey {
    (cell.scale, cell.seed, cell.block_size)
}

/// Packs (once per scale, seed and block size) the generated input for `cell`.
fn input_for(
    cell: &BenchCell,
    dir: &Path,
    cache: &mut HashMap<InputKey, StoredMatrix>,
) -> Result<()> {
    let key = input_key(cell);
    if cache.contains_key(&key) {
        return Ok(());
    }
    let params = RmatParams::preset(cell.preset, cell.scale).with_seed(cell.seed);
    let m = generate(&params)?;
    let path = dir.join(format!(
        "{}-s{}-seed{}-b{}.blk",
        cell.preset, cell.scale, cell.seed, cell.block_size
    ));
    let stored = pack_matrix(&m, cell.block_size, path)?;
    cache.insert(key, stored);
    Ok(())
}

/// Runs one cell `repeat` times and summarizes it.
pub fn run_cell(
    input: &StoredMatrix,
    cell: &BenchCell,
    repeat: usize,
    out_dir: &Path,
) -> Result<BenchRow> {
    let output = out_dir.join("product.blk");
    let cfg = EngineConfig::new(&output)
        .with_memory(cell.memory_bytes)
        .with_block_size(cell.block_size)
        .with_threads(cell.threads)
        .with_alpha(cell.alpha)
        .with_variant(cell.variant);
    let mut runs = Vec::with_capacity(repeat);
    let mut last: Option<(MultiplyReport, String)> = None;
    for _ in 0..repeat.max(1) {
        let (c, report) = multiply(input, input, &cfg)?;
        runs.push(report.phases.total);
        let sha = file_sha256(c.path())?;
        c.remove()?;
        last = Some((report, sha));
    }
    let (report, output_sha256) = last.expect("at least one repetition");
    Ok(BenchRow {
        cell: cell.clone(),
        mean_seconds: runs.iter().sum::<f64>() / runs.len() as f64,
        runs,
        io: report.io,
        assigned_blocks: report.assigned_block_counts(),
        entry_imbalance: report.entry_imbalance(),
        input_entries: input.n_entries(),
        output_entries: report.output_entries,
        output_sha256,
        peak_b1_bytes: report.peaks.b1_bytes,
        peak_b2_bytes: report.peaks.b2_bytes,
        peak_bout_bytes: report.peaks.bout_bytes,
    })
}

/// Runs every cell of `suite`, calling `progress` after each.
pub fn run_suite(suite: &BenchSuite, mut progress: impl FnMut(&BenchRow)) -> Result<BenchReport> {
    std::fs::create_dir_all(&suite.work_dir).map_err(|e| Error::storage(&suite.work_dir, e, 0))?;
    let mut inputs = HashMap::new();
    let mut rows = Vec::new();
    for cell in suite.cells() {
        input_for(&cell, &suite.work_dir, &mut inputs)?;
        let row = run_cell(
            &inputs[&input_key(&cell)],
            &cell,
            suite.repeat,
            &suite.work_dir,
        )?;
        progress(&row);
        rows.push(row);
    }
    for (_, m) in inputs {
        m.remove()?;
    }
    Ok(BenchReport {
        format: "oocgemm-bench",
        version: 1,
        rows,
    })
}

impl BenchReport {
    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// Flat per-cell table for plotting: time against scale, variant, α,
    /// memory, and threads, plus spill volume.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record([
            "preset",
            "scale",
            "variant",
            "alpha",
            "memory_bytes",
            "block_size",
            "threads",
            "mean_seconds",
            "min_seconds",
            "max_seconds",
            "spill_flush_bytes",
            "spill_read_bytes",
            "b1_loads",
            "b2_loads",
            "output_entries",
            "entry_imbalance",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            let min = r.runs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = r.runs.iter().copied().fold(0.0, f64::max);
            w.write_record([
                r.cell.preset.to_string(),
                r.cell.scale.to_string(),
                r.cell.variant.to_string(),
                r.cell.alpha.to_string(),
                r.cell.memory_bytes.to_string(),
                r.cell.block_size.to_string(),
                r.cell.threads.to_string(),
                format!("{:.6}", r.mean_seconds),
                format!("{min:.6}"),
                format!("{max:.6}"),
                r.io.spill_flush_bytes.to_string(),
                r.io.spill_read_bytes.to_string(),
                r.io.b1_loads.to_string(),
                r.io.b2_loads.to_string(),
                r.output_entries.to_string(),
                format!("{:.4}", r.entry_imbalance),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_sweep_reports_every_cell() {
        let dir = tempfile::tempdir().unwrap();
        let suite = BenchSuite {
            preset: Benchmark::Graph500,
            scales: vec![6, 7],
            seed: 3,
            memories: vec![1 << 20],
            block_sizes: vec![4096],
            threads: vec![1, 2],
            alphas: vec![0.125],
            variants: vec![Variant::All, Variant::No],
            repeat: 2,
            work_dir: dir.path().join("work"),
        };
        let mut seen = 0;
        let report = run_suite(&suite, |_| seen += 1).unwrap();
        assert_eq!(report.rows.len(), 8);
        assert_eq!(seen, 8);
        for r in &report.rows {
            assert_eq!(r.runs.len(), 2);
            let mean = (r.runs[0] + r.runs[1]) / 2.0;
            assert!((r.mean_seconds - mean).abs() < 1e-12);
        }
        // Same scale: every variant and thread count yields the same product.
        for scale in [6, 7] {
            let shas: Vec<&str> = report
                .rows
                .iter()
                .filter(|r| r.cell.scale == scale)
                .map(|r| r.output_sha256.as_str())
                .collect();
            assert!(shas.windows(2).all(|w| w[0] == w[1]));
        }
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 9);
        let mut json = Vec::new();
        report.write_json(&mut json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 8);
    }
}
