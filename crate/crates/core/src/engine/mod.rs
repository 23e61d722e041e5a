//! The storage-based multiply: workers compute row-wise products over their
//! share of the former matrix, stage results in bounded output shares, spill
//! on overflow, and a final k-way merge writes the result in row order.

mod config;
mod merge;
mod spill;
mod workload;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

pub use config::{EngineConfig, Variant, ENV_PREFIX};
pub use merge::{combine, merge_spills, SegmentStream};
pub use spill::{RunReader, SpillFile, SpillWriter, RUN_HEADER_BYTES};
pub use workload::{plan_block_based, plan_row_based, plan_workloads, Policy, WorkloadPlan};

use crate::buffer::{
    bump, plan_buffers, BufferPlan, FormerSlot, IoSnapshot, IoStats, LatterCache, OutputShare,
    Segment, StageOutcome,
};
use crate::error::{Error, Result};
use crate::matrix::{Accumulate, Entry, EntrySource, HashAccumulator, RawIntermediates};
use crate::store::{BlockWriter, StoredMatrix, ENTRY_BYTES};

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PhaseTimes {
    /// Size-estimation pass over both inputs.
    pub symbolic: f64,
    /// Parallel row-wise products, spills included.
    pub compute: f64,
    /// Final merge, output writing included.
    pub merge: f64,
    /// Part of `merge` spent appending output rows.
    pub write: f64,
    /// Block-load time summed over workers; overlaps `compute`.
    pub load: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ThreadReport {
    pub worker: usize,
    pub assigned_blocks: usize,
    pub b1_loads: u64,
    /// Rows (or row fragments) this worker produced results for.
    pub rows: u64,
    /// Nonzero former-matrix entries processed.
    pub a_entries: u64,
    /// Scalar multiply-adds performed.
    pub products: u64,
    pub spill_runs: u64,
    pub spill_bytes: u64,
    pub peak_share_bytes: u64,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct BufferPeaks {
    pub b1_bytes: u64,
    pub b2_bytes: u64,
    /// Sum over workers of each share's peak.
    pub bout_bytes: u64,
    pub max_share_bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplyReport {
    pub config: EngineConfig,
    pub variant: Variant,
    pub policy: Policy,
    pub plan: BufferPlan,
    pub max_row_entries: u64,
    pub b2_capacity_blocks: usize,
    pub phases: PhaseTimes,
    pub io: IoSnapshot,
    pub threads: Vec<ThreadReport>,
    pub peaks: BufferPeaks,
    /// Output rows with at least one entry.
    pub output_rows: usize,
    pub output_entries: u64,
    pub output_blocks: usize,
    pub output_bytes: u64,
}

impl MultiplyReport {
    pub fn assigned_block_counts(&self) -> Vec<usize> {
        self.threads.iter().map(|t| t.assigned_blocks).collect()
    }

    /// Max over min of per-worker processed former entries; infinite when
    /// some worker processed nothing while another did not.
    pub fn entry_imbalance(&self) -> f64 {
        imbalance(self.threads.iter().map(|t| t.a_entries))
    }

    pub fn product_imbalance(&self) -> f64 {
        imbalance(self.threads.iter().map(|t| t.products))
    }
}

fn imbalance(values: impl Iterator<Item = u64>) -> f64 {
    let (min, max) = values.fold((u64::MAX, 0), |(lo, hi), v| (lo.min(v), hi.max(v)));
    match (min, max) {
        (_, 0) => 1.0,
        (0, _) => f64::INFINITY,
        (lo, hi) => hi as f64 / lo as f64,
    }
}

/// Largest intermediate-result count of any output row: for each row `i` of
/// `a`, the sum of the lengths of the `b` rows its nonzeros select. This is
/// the products row `i` generates before aggregation, not its final entry
/// count. Reads every block of both inputs once.
pub fn max_row_entries(a: &StoredMatrix, b: &StoredMatrix, stats: &IoStats) -> Result<u64> {
    let mut row_len = vec![0u64; b.n_rows()];
    for k in 0..b.block_count() {
        let block = b.read_block(k)?;
        bump(&stats.symbolic_reads, 1);
        for obj in block.objects() {
            row_len[obj.row_id] += obj.entry_count as u64;
        }
    }
    let mut best = 0u64;
    let mut current: Option<(usize, u64)> = None;
    for k in 0..a.block_count() {
        let block = a.read_block(k)?;
        bump(&stats.symbolic_reads, 1);
        for obj in block.objects() {
            let sum: u64 = block
                .entries(obj)
                .iter()
                .filter(|&(_, v)| v != 0.0)
                .map(|(j, _)| row_len[j])
                .sum();
            current = match current {
                Some((row, acc)) if row == obj.row_id => Some((row, acc + sum)),
                Some((_, acc)) => {
                    best = best.max(acc);
                    Some((obj.row_id, sum))
                }
                None => Some((obj.row_id, sum)),
            };
        }
    }
    if let Some((_, acc)) = current {
        best = best.max(acc);
    }
    Ok(best)
}

/// Block size the budget is planned with: the larger input block size.
fn planning_block_size(a: &StoredMatrix, b: &StoredMatrix) -> u64 {
    a.block_size().max(b.block_size()) as u64
}

/// Smallest memory capacity `multiply` accepts for these inputs and knobs.
pub fn minimum_capacity(
    a: &StoredMatrix,
    b: &StoredMatrix,
    threads: usize,
    alpha: f64,
) -> Result<u64> {
    check_dims(a, b)?;
    let max_row = max_row_entries(a, b, &IoStats::new())?;
    let bytes = max_row * ENTRY_BYTES as u64;
    Ok(crate::buffer::minimum_capacity(
        planning_block_size(a, b),
        threads,
        alpha,
        bytes,
    ))
}

fn check_dims(a: &StoredMatrix, b: &StoredMatrix) -> Result<()> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch {
            left_cols: a.n_cols(),
            right_rows: b.n_rows(),
        });
    }
    Ok(())
}

fn same_file(x: &Path, y: &Path) -> bool {
    match (x.canonicalize(), y.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Multiplies `a × b` within `cfg.memory_capacity_bytes` of accounted buffer
/// memory, writing the product to `cfg.output_path`.
pub fn multiply(
    a: &StoredMatrix,
    b: &StoredMatrix,
    cfg: &EngineConfig,
) -> Result<(StoredMatrix, MultiplyReport)> {
    let started = Instant::now();
    cfg.validate()?;
    check_dims(a, b)?;
    if same_file(&cfg.output_path, a.path()) || same_file(&cfg.output_path, b.path()) {
        return Err(Error::Config(format!(
            "output {} would overwrite an input",
            cfg.output_path.display()
        )));
    }
    let stats = IoStats::new();

    let t0 = Instant::now();
    let max_row = max_row_entries(a, b, &stats)?;
    let plan = plan_buffers(
        cfg.memory_capacity_bytes,
        planning_block_size(a, b),
        cfg.threads,
        cfg.alpha,
        max_row * ENTRY_BYTES as u64,
    )?;
    let symbolic = t0.elapsed();

    let policy = if cfg.block_balance {
        Policy::BlockBased
    } else {
        Policy::RowBased
    };
    let workload = plan_workloads(a.table(), cfg.threads, policy);
    let b2_blocks = plan.b2_blocks(b.block_size());
    let cache = LatterCache::new(b, b2_blocks, &stats)?;
    let share_bytes = plan.output_share_bytes();
    log::debug!(
        "plan: B1 {} B, B2 {} B ({b2_blocks} blocks), Bout {} B, max_row {max_row} entries",
        plan.b1_bytes,
        plan.b2_bytes,
        plan.bout_bytes
    );

    let spill_parent = match &cfg.spill_dir {
        Some(d) => d.clone(),
        None => parent_dir(&cfg.output_path),
    };
    let spill_dir = tempfile::Builder::new()
        .prefix("oocgemm-spill-")
        .tempdir_in(&spill_parent)
        .map_err(|e| Error::storage(&spill_parent, e, 0))?;

    let t1 = Instant::now();
    let ctx = WorkerContext {
        a,
        plan: &workload,
        cache: &cache,
        stats: &stats,
        share_bytes,
        spill_dir: spill_dir.path(),
        partial_aggregation: cfg.partial_aggregation,
    };
    let outputs: Vec<WorkerOutput> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.threads)
            .map(|w| {
                let ctx = &ctx;
                s.spawn(move || {
                    if ctx.partial_aggregation {
                        run_worker(ctx, w, HashAccumulator::new())
                    } else {
                        run_worker(ctx, w, RawIntermediates::new())
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect::<Result<_>>()
    })?;
    let compute = t1.elapsed();

    let t2 = Instant::now();
    let mut threads = Vec::with_capacity(outputs.len());
    let mut spills = Vec::with_capacity(outputs.len());
    let mut staged = Vec::with_capacity(outputs.len());
    for out in outputs {
        threads.push(out.report);
        spills.push(out.spill);
        staged.push(out.staged);
    }
    let streams = spills
        .iter()
        .zip(staged)
        .map(|(spill, staged)| SegmentStream::new(spill.as_ref(), staged, &stats))
        .collect::<Result<Vec<_>>>()?;
    let mut writer = BlockWriter::create(&cfg.output_path, cfg.block_size_bytes, b.n_cols())?;
    let mut write_time = Duration::ZERO;
    let output_rows = merge_spills(streams, |row, entries| {
        let w0 = Instant::now();
        let r = writer.append_row(row, &entries);
        write_time += w0.elapsed();
        r
    })?;
    let w0 = Instant::now();
    let c = writer.finish(a.n_rows())?;
    write_time += w0.elapsed();
    bump(&stats.output_write_bytes, c.file_bytes());
    drop(spills);
    spill_dir
        .close()
        .map_err(|e| Error::storage(&spill_parent, e, 0))?;
    let merge = t2.elapsed();

    let io = stats.snapshot();
    let peaks = BufferPeaks {
        b1_bytes: threads.iter().filter(|t| t.b1_loads > 0).count() as u64 * a.block_size() as u64,
        b2_bytes: (cache.peak_resident_blocks() * b.block_size()) as u64,
        bout_bytes: threads.iter().map(|t| t.peak_share_bytes).sum(),
        max_share_bytes: threads
            .iter()
            .map(|t| t.peak_share_bytes)
            .max()
            .unwrap_or(0),
    };
    let report = MultiplyReport {
        config: cfg.clone(),
        variant: cfg.variant(),
        policy,
        plan,
        max_row_entries: max_row,
        b2_capacity_blocks: b2_blocks,
        phases: PhaseTimes {
            symbolic: symbolic.as_secs_f64(),
            compute: compute.as_secs_f64(),
            merge: merge.as_secs_f64(),
            write: write_time.as_secs_f64(),
            load: io.load_seconds,
            total: started.elapsed().as_secs_f64(),
        },
        io,
        threads,
        peaks,
        output_rows,
        output_entries: c.n_entries(),
        output_blocks: c.block_count(),
        output_bytes: c.file_bytes(),
    };
    Ok((c, report))
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

struct WorkerContext<'a> {
    a: &'a StoredMatrix,
    plan: &'a WorkloadPlan,
    cache: &'a LatterCache<'a>,
    stats: &'a IoStats,
    share_bytes: u64,
    spill_dir: &'a Path,
    partial_aggregation: bool,
}

struct WorkerOutput {
    report: ThreadReport,
    spill: Option<SpillFile>,
    staged: Vec<Segment>,
}

/// Per-worker output side: the share, the lazily created spill file, and
/// the accumulator for the row in progress.
struct Sink<'a, A> {
    ctx: &'a WorkerContext<'a>,
    worker: usize,
    share: OutputShare,
    spill: Option<SpillWriter>,
    acc: A,
}

impl<A: Accumulate> Sink<'_, A> {
    fn writer(&mut self) -> Result<&mut SpillWriter> {
        if self.spill.is_none() {
            let path = self
                .ctx
                .spill_dir
                .join(format!("worker-{}.runs", self.worker));
            self.spill = Some(SpillWriter::create(path)?);
        }
        Ok(self.spill.as_mut().expect("spill writer just created"))
    }

    fn spill_staged(&mut self) -> Result<()> {
        let staged = self.share.take_staged();
        let stats = self.ctx.stats;
        self.writer()?.write_run(&staged, stats)
    }

    fn drain(&mut self, row: usize) -> Segment {
        let mut entries = Vec::with_capacity(self.acc.len());
        self.acc.drain_sorted_into(&mut entries);
        Segment {
            row_id: row,
            entries,
        }
    }

    /// Frees share space so that accumulation of `row` can continue: spills
    /// the staged rows, or the partial accumulator itself if nothing is staged.
    fn overflow(&mut self, row: usize) -> Result<()> {
        if !self.share.is_empty() {
            self.spill_staged()
        } else {
            let partial = self.drain(row);
            let stats = self.ctx.stats;
            self.writer()?
                .write_run(std::slice::from_ref(&partial), stats)
        }
    }

    fn finish_row(&mut self, row: usize) -> Result<()> {
        if self.acc.is_empty() {
            return Ok(());
        }
        let segment = self.drain(row);
        if let StageOutcome::Overflow(segment) = self.share.stage(segment) {
            self.spill_staged()?;
            if let StageOutcome::Overflow(segment) = self.share.stage(segment) {
                let stats = self.ctx.stats;
                self.writer()?
                    .write_run(std::slice::from_ref(&segment), stats)?;
            }
        }
        Ok(())
    }

    /// Adds `scale × src` to the row in progress without exceeding the share.
    fn feed<S: EntrySource + ?Sized>(&mut self, row: usize, scale: f64, src: &S) -> Result<()> {
        let n = src.entry_count();
        let mut start = 0;
        loop {
            start = self
                .acc
                .accumulate_scaled_from(scale, src, start, self.share.room_entries());
            self.share.observe((self.acc.len() * ENTRY_BYTES) as u64);
            if start >= n {
                return Ok(());
            }
            self.overflow(row)?;
        }
    }
}

fn run_worker<A: Accumulate>(
    ctx: &WorkerContext<'_>,
    worker: usize,
    acc: A,
) -> Result<WorkerOutput> {
    let blocks = ctx.plan.blocks(worker);
    let mut report = ThreadReport {
        worker,
        assigned_blocks: blocks.len(),
        ..ThreadReport::default()
    };
    let mut sink = Sink {
        ctx,
        worker,
        share: OutputShare::new(ctx.share_bytes),
        spill: None,
        acc,
    };
    let mut slot = FormerSlot::new(ctx.a, ctx.stats);
    let mut current: Option<usize> = None;
    let mut scratch: Vec<Entry> = Vec::new();
    for &k in blocks {
        let block = slot.load(k)?;
        report.b1_loads += 1;
        for obj in block.objects() {
            let row = obj.row_id;
            if !ctx.plan.owns_row(worker, row) {
                continue;
            }
            if current != Some(row) {
                if let Some(prev) = current {
                    sink.finish_row(prev)?;
                }
                current = Some(row);
                report.rows += 1;
            }
            scratch.clear();
            scratch.extend(block.entries(obj).iter().filter(|&(_, v)| v != 0.0));
            for &(j, aij) in &scratch {
                report.a_entries += 1;
                let b_row = ctx.cache.fetch_row(j)?;
                let src = b_row.entries();
                report.products += src.len() as u64;
                sink.feed(row, aij, &src)?;
            }
        }
    }
    slot.release();
    if let Some(prev) = current {
        sink.finish_row(prev)?;
    }
    report.peak_share_bytes = sink.share.peak_bytes();
    let staged = sink.share.take_staged();
    let spill = sink.spill.take().map(SpillWriter::finish).transpose()?;
    if let Some(f) = &spill {
        report.spill_runs = f.runs;
        report.spill_bytes = f.bytes;
    }
    Ok(WorkerOutput {
        report,
        spill,
        staged,
    })
}
