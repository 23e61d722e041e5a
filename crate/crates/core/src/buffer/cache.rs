use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Instant;

use super::stats::{bump, IoStats};
use crate::error::{Error, Result};
use crate::store::{Block, EntryBytes, ObjectMeta, StoredMatrix};

enum Slot {
    Loading,
    Ready {
        block: Arc<Block>,
        pins: usize,
        tick: u64,
    },
}

#[derive(Default)]
struct CacheState {
    slots: HashMap<usize, Slot>,
    /// Recency order of ready blocks: tick -> block index.
    lru: BTreeMap<u64, usize>,
    tick: u64,
    /// Slots counted against the budget, loading ones included.
    resident: usize,
    peak_resident: usize,
}

impl CacheState {
    fn touch(&mut self, index: usize) {
        self.tick += 1;
        let now = self.tick;
        if let Some(Slot::Ready { tick, .. }) = self.slots.get_mut(&index) {
            self.lru.remove(tick);
            *tick = now;
            self.lru.insert(now, index);
        }
    }

    /// Evicts the least recently used unpinned block, if any.
    fn evict_one(&mut self) -> bool {
        let victim = self
            .lru
            .iter()
            .find_map(|(&tick, &index)| match self.slots.get(&index) {
                Some(Slot::Ready { pins: 0, .. }) => Some((tick, index)),
                _ => None,
            });
        match victim {
            Some((tick, index)) => {
                self.lru.remove(&tick);
                self.slots.remove(&index);
                self.resident -= 1;
                true
            }
            None => false,
        }
    }
}

/// Block cache for the latter input matrix, shared by all workers.
///
/// Holds at most `capacity_blocks` blocks and evicts least recently used
/// first. Blocks handed out are pinned until the handle is dropped and are
/// never evicted while pinned. Concurrent requests for a block that is being
/// loaded wait for that single load instead of issuing their own.
pub struct LatterCache<'a> {
    store: &'a StoredMatrix,
    capacity_blocks: usize,
    state: Mutex<CacheState>,
    changed: Condvar,
    stats: &'a IoStats,
}

impl<'a> LatterCache<'a> {
    pub fn new(
        store: &'a StoredMatrix,
        capacity_blocks: usize,
        stats: &'a IoStats,
    ) -> Result<Self> {
        if capacity_blocks == 0 {
            return Err(Error::Config(
                "latter input buffer must hold at least one block".into(),
            ));
        }
        Ok(LatterCache {
            store,
            capacity_blocks,
            state: Mutex::new(CacheState::default()),
            changed: Condvar::new(),
            stats,
        })
    }

    pub fn capacity_blocks(&self) -> usize {
        self.capacity_blocks
    }

    fn lock(&self) -> MutexGuard<'_, CacheState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn resident_blocks(&self) -> usize {
        self.lock().resident
    }

    pub fn peak_resident_blocks(&self) -> usize {
        self.lock().peak_resident
    }

    /// Whether block `index` is currently mapped.
    pub fn contains(&self, index: usize) -> bool {
        matches!(self.lock().slots.get(&index), Some(Slot::Ready { .. }))
    }

    /// Returns block `index` pinned, loading it on a miss.
    pub fn fetch_block(&self, index: usize) -> Result<PinnedBlock<'_, 'a>> {
        let mut state = self.lock();
        loop {
            match state.slots.get_mut(&index) {
                Some(Slot::Ready { block, pins, .. }) => {
                    *pins += 1;
                    let block = Arc::clone(block);
                    state.touch(index);
                    bump(&self.stats.b2_hits, 1);
                    return Ok(PinnedBlock { cache: self, block });
                }
                Some(Slot::Loading) => {
                    state = self.changed.wait(state).unwrap_or_else(|e| e.into_inner());
                }
                None => {
                    if state.resident < self.capacity_blocks {
                        break;
                    }
                    if state.evict_one() {
                        bump(&self.stats.b2_evictions, 1);
                        break;
                    }
                    // Everything resident is pinned or loading.
                    state = self.changed.wait(state).unwrap_or_else(|e| e.into_inner());
                }
            }
        }
        state.slots.insert(index, Slot::Loading);
        state.resident += 1;
        state.peak_resident = state.peak_resident.max(state.resident);
        drop(state);

        let started = Instant::now();
        let loaded = self.store.read_block(index);
        bump(&self.stats.load_nanos, started.elapsed().as_nanos() as u64);

        let mut state = self.lock();
        let result = match loaded {
            Ok(block) => {
                bump(&self.stats.b2_loads, 1);
                let block = Arc::new(block);
                state.slots.insert(
                    index,
                    Slot::Ready {
                        block: Arc::clone(&block),
                        pins: 1,
                        tick: 0,
                    },
                );
                state.touch(index);
                Ok(PinnedBlock { cache: self, block })
            }
            Err(e) => {
                state.slots.remove(&index);
                state.resident -= 1;
                Err(e)
            }
        };
        drop(state);
        self.changed.notify_all();
        result
    }

    fn unpin(&self, index: usize) {
        let mut state = self.lock();
        let mut released = false;
        if let Some(Slot::Ready { pins, .. }) = state.slots.get_mut(&index) {
            *pins -= 1;
            released = *pins == 0;
        }
        let full = state.resident >= self.capacity_blocks;
        drop(state);
        if released && full {
            self.changed.notify_all();
        }
    }

    /// Returns the entries of row `row`, reassembling split rows.
    pub fn fetch_row(&self, row: usize) -> Result<RowView<'_, 'a>> {
        let first = self.store.locate_block(row)?;
        let block = self.fetch_block(first)?;
        let object = block.object_for(row)?;
        if object.fragment_count == 1 {
            return Ok(RowView::Pinned { block, object });
        }
        let mut bytes = block.block.entries(&object).as_bytes().to_vec();
        drop(block);
        for k in 1..object.fragment_count as usize {
            let next = self.fetch_block(first + k)?;
            let part = next.object_for(row)?;
            bytes.extend_from_slice(next.block.entries(&part).as_bytes());
        }
        Ok(RowView::Assembled(bytes))
    }
}

/// A cached block that cannot be evicted while this handle lives.
pub struct PinnedBlock<'c, 'a> {
    cache: &'c LatterCache<'a>,
    block: Arc<Block>,
}

impl PinnedBlock<'_, '_> {
    pub fn block(&self) -> &Block {
        &self.block
    }

    fn object_for(&self, row: usize) -> Result<ObjectMeta> {
        self.block
            .find(row)
            .map(|i| self.block.objects()[i])
            .ok_or_else(|| {
                Error::format(format!(
                    "row {row} missing from block {}",
                    self.block.index()
                ))
            })
    }
}

impl Drop for PinnedBlock<'_, '_> {
    fn drop(&mut self) {
        self.cache.unpin(self.block.index());
    }
}

/// One latter-matrix row as returned by [`LatterCache::fetch_row`].
pub enum RowView<'c, 'a> {
    /// Single-fragment row read in place from a pinned block.
    Pinned {
        block: PinnedBlock<'c, 'a>,
        object: ObjectMeta,
    },
    /// Split row copied out of its fragments' blocks.
    Assembled(Vec<u8>),
}

impl RowView<'_, '_> {
    pub fn entries(&self) -> EntryBytes<'_> {
        match self {
            RowView::Pinned { block, object } => block.block.entries(object),
            RowView::Assembled(bytes) => EntryBytes::new(bytes),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseMatrix;
    use crate::store::pack_matrix;

    /// 6 rows of 8 entries in blocks of exactly two rows: blocks 0,1,2.
    fn three_block_store(dir: &std::path::Path) -> (SparseMatrix, StoredMatrix) {
        let m = SparseMatrix::from_triplets(
            6,
            8,
            (0..6).flat_map(|r| (0..8).map(move |c| (r, c, (r * 8 + c + 1) as f64))),
        )
        .unwrap();
        let bs = 24 + 2 * (20 + 8 * 16);
        let sm = pack_matrix(&m, bs, dir.join("m.blk")).unwrap();
        assert_eq!(sm.block_count(), 3);
        (m, sm)
    }

    #[test]
    fn repeated_fetch_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let (m, sm) = three_block_store(dir.path());
        let stats = IoStats::new();
        let cache = LatterCache::new(&sm, 2, &stats).unwrap();
        let a = cache.fetch_row(3).unwrap().entries().to_vec();
        let b = cache.fetch_row(3).unwrap().entries().to_vec();
        assert_eq!(a, m.row(3).entries());
        assert_eq!(a, b);
        let s = stats.snapshot();
        assert_eq!((s.b2_loads, s.b2_hits), (1, 1));
    }

    #[test]
    fn lru_trace_reloads_evicted_block() {
        let dir = tempfile::tempdir().unwrap();
        let (_, sm) = three_block_store(dir.path());
        let stats = IoStats::new();
        let cache = LatterCache::new(&sm, 2, &stats).unwrap();
        // Rows 0, 2, 4, 0 live in blocks 0, 1, 2, 0.
        for row in [0, 2, 4, 0] {
            drop(cache.fetch_row(row).unwrap());
        }
        let s = stats.snapshot();
        assert_eq!(s.b2_loads, 4);
        assert_eq!(s.b2_evictions, 2);
        assert!(cache.contains(0) && cache.contains(2) && !cache.contains(1));
        assert_eq!(cache.peak_resident_blocks(), 2);
        assert_eq!(sm.read_count(), 4);
    }

    #[test]
    fn split_row_costs_one_load_per_fragment() {
        let dir = tempfile::tempdir().unwrap();
        let m =
            SparseMatrix::from_triplets(2, 100, (0..100).map(|c| (1, c, c as f64 + 1.0))).unwrap();
        let sm = pack_matrix(&m, 24 + 20 + 40 * 16, dir.path().join("s.blk")).unwrap();
        let stats = IoStats::new();
        let cache = LatterCache::new(&sm, 1, &stats).unwrap();
        let row = cache.fetch_row(1).unwrap();
        assert_eq!(row.entries().to_vec(), m.row(1).entries());
        assert_eq!(stats.snapshot().b2_loads, 3);
        assert!(matches!(
            cache.fetch_row(9),
            Err(Error::RowNotFound { row: 9 })
        ));
    }

    #[test]
    fn pinned_blocks_are_not_evicted() {
        let dir = tempfile::tempdir().unwrap();
        let (m, sm) = three_block_store(dir.path());
        let stats = IoStats::new();
        let cache = LatterCache::new(&sm, 2, &stats).unwrap();
        let held = cache.fetch_row(0).unwrap();
        drop(cache.fetch_row(2).unwrap());
        drop(cache.fetch_row(4).unwrap()); // must evict block 1, not pinned block 0
        assert!(cache.contains(0));
        assert!(!cache.contains(1));
        assert_eq!(held.entries().to_vec(), m.row(0).entries());
    }

    #[test]
    fn concurrent_readers_see_consistent_rows() {
        let dir = tempfile::tempdir().unwrap();
        let (m, sm) = three_block_store(dir.path());
        let stats = IoStats::new();
        let cache = LatterCache::new(&sm, 1, &stats).unwrap();
        std::thread::scope(|s| {
            for t in 0..4 {
                let cache = &cache;
                let m = &m;
                s.spawn(move || {
                    for k in 0..200 {
                        let row = (k * 7 + t) % 6;
                        let view = cache.fetch_row(row).unwrap();
                        assert_eq!(view.entries().to_vec(), m.row(row).entries());
                    }
                });
            }
        });
        assert!(cache.peak_resident_blocks() <= 1);
        let s = stats.snapshot();
        assert_eq!(s.b2_loads + s.b2_hits, 800);
        assert_eq!(s.b2_loads, sm.read_count());
    }
}
