use serde::Serialize;

use crate::store::ObjectIndexTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Contiguous runs of former-matrix blocks, equal counts up to one.
    BlockBased,
    /// Row `i` goes to worker `i mod t`, whatever its size.
    RowBased,
}

/// Which former-matrix blocks each worker reads, and which of their rows it
/// computes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadPlan {
    policy: Policy,
    blocks: Vec<Vec<usize>>,
}

impl WorkloadPlan {
    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn threads(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self, worker: usize) -> &[usize] {
        &self.blocks[worker]
    }

    pub fn block_counts(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Whether `worker` computes (its part of) `row`. Under block-based
    /// allocation every row in an assigned block belongs to the worker; a
    /// split row is then shared by the owners of its fragments.
    pub fn owns_row(&self, worker: usize, row: usize) -> bool {
        match self.policy {
            Policy::BlockBased => true,
            Policy::RowBased => row % self.blocks.len() == worker,
        }
    }
}

/// Deals `n_blocks` blocks over `threads` workers in contiguous runs; the
/// first `n_blocks mod t` workers get one extra.
pub fn plan_block_based(n_blocks: usize, threads: usize) -> WorkloadPlan {
    assert!(threads >= 1);
    let base = n_blocks / threads;
    let extra = n_blocks % threads;
    let mut next = 0;
    let blocks = (0..threads)
        .map(|w| {
            let n = base + usize::from(w < extra);
            let run: Vec<usize> = (next..next + n).collect();
            next += n;
            run
        })
        .collect();
    WorkloadPlan {
        policy: Policy::BlockBased,
        blocks,
    }
}

/// Row-based plan: each worker reads every block holding one of its rows.
pub fn plan_row_based(table: &ObjectIndexTable, threads: usize) -> WorkloadPlan {
    assert!(threads >= 1);
    let blocks = (0..threads)
        .map(|w| {
            table
                .ranges()
                .iter()
                .enumerate()
                .filter(|&(_, &(first, last))| {
                    last - first + 1 >= threads || (first..=last).any(|r| r % threads == w)
                })
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    WorkloadPlan {
        policy: Policy::RowBased,
        blocks,
    }
}

pub fn plan_workloads(table: &ObjectIndexTable, threads: usize, policy: Policy) -> WorkloadPlan {
    match policy {
        Policy::BlockBased => plan_block_based(table.len(), threads),
        Policy::RowBased => plan_row_based(table, threads),
    }
}
