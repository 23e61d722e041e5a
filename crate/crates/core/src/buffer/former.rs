use std::time::Instant;

use super::stats::{bump, IoStats};
use crate::error::Result;
use crate::store::{Block, StoredMatrix};

/// One worker's slot in the former input buffer.
///
/// Holds exactly one block of the former matrix; loading the next assigned
/// block replaces it wholesale, so there is nothing to evict.
pub struct FormerSlot<'a> {
    store: &'a StoredMatrix,
    stats: &'a IoStats,
    block: Option<Block>,
}

impl<'a> FormerSlot<'a> {
    pub fn new(store: &'a StoredMatrix, stats: &'a IoStats) -> Self {
        FormerSlot {
            store,
            stats,
            block: None,
        }
    }

    /// Makes block `index` resident, reading it unless it already is.
    pub fn load(&mut self, index: usize) -> Result<&Block> {
        if self.block.as_ref().map(Block::index) != Some(index) {
            self.block = None;
            let started = Instant::now();
            let block = self.store.read_block(index)?;
            bump(&self.stats.load_nanos, started.elapsed().as_nanos() as u64);
            bump(&self.stats.b1_loads, 1);
            self.block = Some(block);
        }
        Ok(self.block.as_ref().expect("block just loaded"))
    }

    pub fn resident(&self) -> Option<usize> {
        self.block.as_ref().map(Block::index)
    }

    pub fn release(&mut self) {
        self.block = None;
    }
}
