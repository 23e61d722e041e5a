use serde::Serialize;

use crate::error::{Error, Result};
use crate::store::ENTRY_BYTES;

/// How the memory budget is split between the three buffers.
///
/// * former input buffer: one block per worker, `b × t`;
/// * output buffer: `α × max_row × t`, sized from the largest possible
///   intermediate row but scaled down by `α`, since most rows of a skewed
///   graph produce far less than the maximum;
/// * latter input buffer: whatever remains of `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BufferPlan {
    pub capacity_bytes: u64,
    pub block_size_bytes: u64,
    pub threads: usize,
    pub alpha: f64,
    pub max_row_bytes: u64,
    pub b1_bytes: u64,
    pub b2_bytes: u64,
    pub bout_bytes: u64,
}

impl BufferPlan {
    /// Static share of the output buffer owned by each worker.
    pub fn output_share_bytes(&self) -> u64 {
        self.bout_bytes / self.threads as u64
    }

    /// Whole blocks of `block_size` bytes that fit the latter input buffer.
    pub fn b2_blocks(&self, block_size: usize) -> usize {
        (self.b2_bytes / block_size as u64) as usize
    }
}

/// Output buffer bytes `⌊α × max_row × t⌋`, raised to one entry per worker
/// when that product is smaller and `max_row > 0`: a share that cannot hold
/// a single entry could never make progress.
pub fn output_buffer_bytes(alpha: f64, max_row_bytes: u64, threads: usize) -> u64 {
    let bytes = (alpha * max_row_bytes as f64 * threads as f64).floor() as u64;
    if max_row_bytes == 0 {
        0
    } else {
        bytes.max((ENTRY_BYTES * threads) as u64)
    }
}

/// Smallest capacity for which [`plan_buffers`] succeeds.
pub fn minimum_capacity(block_size: u64, threads: usize, alpha: f64, max_row_bytes: u64) -> u64 {
    block_size * threads as u64 + output_buffer_bytes(alpha, max_row_bytes, threads) + block_size
}

/// Splits `capacity` bytes into the three buffers.
///
/// Fails when the former buffer, the output buffer, and one latter-buffer
/// block do not fit, naming the smallest feasible capacity.
pub fn plan_buffers(
    capacity: u64,
    block_size: u64,
    threads: usize,
    alpha: f64,
    max_row_bytes: u64,
) -> Result<BufferPlan> {
    if threads == 0 {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if block_size == 0 {
        return Err(Error::Config("block size must be positive".into()));
    }
    let b1 = block_size
        .checked_mul(threads as u64)
        .ok_or_else(|| Error::Config("former buffer size overflows".into()))?;
    let bout = output_buffer_bytes(alpha, max_row_bytes, threads);
    let minimum = b1 + bout + block_size;
    if capacity < minimum {
        return Err(Error::InfeasibleBudget {
            capacity,
            minimum,
            detail: format!(
                "former buffer {b1} + output buffer {bout} + one latter block {block_size}"
            ),
        });
    }
    Ok(BufferPlan {
        capacity_bytes: capacity,
        block_size_bytes: block_size,
        threads,
        alpha,
        max_row_bytes,
        b1_bytes: b1,
        b2_bytes: capacity - b1 - bout,
        bout_bytes: bout,
    })
}
