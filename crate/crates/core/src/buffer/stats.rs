use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

/// Storage-memory I/O counters, shared by all workers of one multiply.
#[derive(Debug, Default)]
pub struct IoStats {
    pub(crate) b1_loads: AtomicU64,
    pub(crate) b2_loads: AtomicU64,
    pub(crate) b2_hits: AtomicU64,
    pub(crate) b2_evictions: AtomicU64,
    pub(crate) symbolic_reads: AtomicU64,
    pub(crate) spill_runs: AtomicU64,
    pub(crate) spill_flush_bytes: AtomicU64,
    pub(crate) spill_read_bytes: AtomicU64,
    pub(crate) output_write_bytes: AtomicU64,
    pub(crate) load_nanos: AtomicU64,
}

pub(crate) fn bump(counter: &AtomicU64, by: u64) {
    counter.fetch_add(by, Ordering::Relaxed);
}

impl IoStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> IoSnapshot {
        let get = |c: &AtomicU64| c.load(Ordering::Relaxed);
        IoSnapshot {
            b1_loads: get(&self.b1_loads),
            b2_loads: get(&self.b2_loads),
            b2_hits: get(&self.b2_hits),
            b2_evictions: get(&self.b2_evictions),
            symbolic_reads: get(&self.symbolic_reads),
            spill_runs: get(&self.spill_runs),
            spill_flush_bytes: get(&self.spill_flush_bytes),
            spill_read_bytes: get(&self.spill_read_bytes),
            output_write_bytes: get(&self.output_write_bytes),
            load_seconds: get(&self.load_nanos) as f64 * 1e-9,
        }
    }
}

/// Point-in-time copy of [`IoStats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IoSnapshot {
    pub b1_loads: u64,
    pub b2_loads: u64,
    pub b2_hits: u64,
    pub b2_evictions: u64,
    /// Block reads of the size-estimation pass that precedes the multiply.
    pub symbolic_reads: u64,
    pub spill_runs: u64,
    pub spill_flush_bytes: u64,
    pub spill_read_bytes: u64,
    pub output_write_bytes: u64,
    /// Time spent in block loads, summed over workers.
    pub load_seconds: f64,
}
