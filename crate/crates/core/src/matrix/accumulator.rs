use super::{Entry, SparseRow};

/// Random access to the entries of one row, however they are stored.
pub trait EntrySource {
    fn entry_count(&self) -> usize;
    fn entry(&self, i: usize) -> Entry;

    /// Calls `f` on the entries from `start` on, stopping at the first one
    /// for which it returns `false`. Returns that entry's index, or
    /// [`entry_count`](Self::entry_count) if none stopped it.
    #[inline]
    fn visit_from(&self, start: usize, mut f: impl FnMut(Entry) -> bool) -> usize {
        let n = self.entry_count();
        for k in start..n {
            if !f(self.entry(k)) {
                return k;
            }
        }
        n
    }
}

impl EntrySource for [Entry] {
    #[inline]
    fn entry_count(&self) -> usize {
        self.len()
    }

    #[inline]
    fn entry(&self, i: usize) -> Entry {
        self[i]
    }
}

impl EntrySource for Vec<Entry> {
    #[inline]
    fn entry_count(&self) -> usize {
        self.len()
    }

    #[inline]
    fn entry(&self, i: usize) -> Entry {
        self[i]
    }
}

/// Collects the intermediate results of one output row.
pub trait Accumulate {
    /// Number of entries currently held, i.e. what a drain would emit.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Feeds `scale · src[start..]`, stopping before the entry that would push
    /// [`len`](Self::len) above `limit`. Returns the index of the first entry
    /// not consumed (`src.entry_count()` when everything fit).
    ///
    /// Zero-valued source entries contribute no term and are skipped.
    fn accumulate_scaled_from<S: EntrySource + ?Sized>(
        &mut self,
        scale: f64,
        src: &S,
        start: usize,
        limit: usize,
    ) -> usize;

    /// Appends the held entries to `out` sorted by column and resets.
    fn drain_sorted_into(&mut self, out: &mut Vec<Entry>);
}

const EMPTY: usize = usize::MAX;
const MIN_CAPACITY: usize = 16;
const SHRINK_FACTOR: usize = 64;

#[derive(Clone, Copy)]
struct Slot {
    col: usize,
    value: f64,
}

const VACANT: Slot = Slot {
    col: EMPTY,
    value: 0.0,
};

/// Open-addressing (linear probing) map from column to running sum.
///
/// The table stays at most half full and doubles when it would exceed that.
/// `occupied` lists used slots so draining costs time proportional to the
/// number of entries, not to the table size.
pub struct HashAccumulator {
    slots: Vec<Slot>,
    occupied: Vec<usize>,
    shift: u32,
    scratch: Vec<Entry>,
}

impl Default for HashAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl HashAccumulator {
    pub fn new() -> Self {
        Self::with_expected(0)
    }

    /// Sizes the table to the next power of two at least twice `expected`.
    pub fn with_expected(expected: usize) -> Self {
        let capacity = expected
            .saturating_mul(2)
            .max(MIN_CAPACITY)
            .next_power_of_two();
        HashAccumulator {
            slots: vec![VACANT; capacity],
            occupied: Vec::new(),
            shift: 64 - capacity.trailing_zeros(),
            scratch: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    #[inline]
    fn home(&self, col: usize) -> usize {
        // Fibonacci hashing: the top bits of a multiplicative hash.
        ((col as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> self.shift) as usize
    }

    /// Slot index holding `col`, or the vacant slot where it would go.
    #[inline]
    fn probe(&self, col: usize) -> usize {
        let mask = self.slots.len() - 1;
        let mut i = self.home(col);
        loop {
            let c = self.slots[i].col;
            if c == col || c == EMPTY {
                return i;
            }
            i = (i + 1) & mask;
        }
    }

    fn grow(&mut self) {
        let capacity = self.slots.len() * 2;
        let old = std::mem::replace(&mut self.slots, vec![VACANT; capacity]);
        self.shift -= 1;
        let mut occupied = std::mem::take(&mut self.occupied);
        for pos in occupied.iter_mut() {
            let slot = old[*pos];
            let mut i = self.home(slot.col);
            while self.slots[i].col != EMPTY {
                i = (i + 1) & (capacity - 1);
            }
            self.slots[i] = slot;
            *pos = i;
        }
        self.occupied = occupied;
    }

    /// Adds `value` to the sum for `col`, inserting the column if absent.
    #[inline]
    pub fn add(&mut self, col: usize, value: f64) {
        let i = self.probe(col);
        if self.slots[i].col == col {
            self.slots[i].value += value;
        } else {
            self.insert_at(i, col, value);
        }
    }

    #[inline]
    fn insert_at(&mut self, mut i: usize, col: usize, value: f64) {
        if (self.occupied.len() + 1) * 2 > self.slots.len() {
            self.grow();
            i = self.probe(col);
        }
        self.slots[i] = Slot { col, value };
        self.occupied.push(i);
    }

    pub fn get(&self, col: usize) -> Option<f64> {
        let slot = self.slots[self.probe(col)];
        (slot.col == col).then_some(slot.value)
    }

    /// Column-wise adds every entry of `row`.
    pub fn accumulate(&mut self, row: &SparseRow) {
        for &(c, v) in row.entries() {
            self.add(c, v);
        }
    }

    pub fn drain_sorted(&mut self) -> Vec<Entry> {
        let mut out = Vec::with_capacity(self.occupied.len());
        self.drain_sorted_into(&mut out);
        out
    }

    /// Drops a table left oversized by an earlier long row, so that short
    /// rows probe a cache-resident table instead of one spread over megabytes.
    fn shrink_for(&mut self, recent: usize) {
        let fit = recent
            .saturating_mul(2)
            .max(MIN_CAPACITY)
            .next_power_of_two();
        if self.slots.len() > fit * SHRINK_FACTOR {
            self.slots = vec![VACANT; fit];
            self.shift = 64 - fit.trailing_zeros();
        }
    }

    pub fn clear(&mut self) {
        for &i in &self.occupied {
            self.slots[i] = VACANT;
        }
        self.occupied.clear();
    }
}

impl Accumulate for HashAccumulator {
    fn len(&self) -> usize {
        self.occupied.len()
    }

    fn accumulate_scaled_from<S: EntrySource + ?Sized>(
        &mut self,
        scale: f64,
        src: &S,
        start: usize,
        limit: usize,
    ) -> usize {
        src.visit_from(start, |(c, v)| {
            if v == 0.0 {
                return true;
            }
            let i = self.probe(c);
            if self.slots[i].col == c {
                self.slots[i].value += scale * v;
            } else if self.occupied.len() < limit {
                self.insert_at(i, c, scale * v);
            } else {
                return false;
            }
            true
        })
    }

    fn drain_sorted_into(&mut self, out: &mut Vec<Entry>) {
        let base = out.len();
        out.extend(self.occupied.iter().map(|&i| {
            let s = self.slots[i];
            (s.col, s.value)
        }));
        sort_by_column(&mut out[base..], &mut self.scratch);
        let drained = out.len() - base;
        self.clear();
        self.shrink_for(drained);
    }
}

const RADIX_MIN_LEN: usize = 256;
const RADIX_BITS: u32 = 8;

/// Sorts entries with distinct columns by column. Long runs use an LSD radix
/// sort over only the digits the largest column needs, so cost stays linear
/// in the row length.
fn sort_by_column(entries: &mut [Entry], scratch: &mut Vec<Entry>) {
    if entries.len() < RADIX_MIN_LEN {
        entries.sort_unstable_by_key(|&(c, _)| c);
        return;
    }
    let max = entries.iter().map(|&(c, _)| c).max().unwrap_or(0);
    let bits = usize::BITS - max.leading_zeros();
    let passes = bits.div_ceil(RADIX_BITS);
    if scratch.len() < entries.len() {
        scratch.resize(entries.len(), (0, 0.0));
    }
    let scratch = &mut scratch[..entries.len()];
    const BUCKETS: usize = 1 << RADIX_BITS;
    let mask = BUCKETS - 1;
    let mut src_is_entries = true;
    for pass in 0..passes {
        let shift = pass * RADIX_BITS;
        let (src, dst): (&[Entry], &mut [Entry]) = if src_is_entries {
            (&*entries, &mut *scratch)
        } else {
            (&*scratch, &mut *entries)
        };
        let mut offsets = [0usize; BUCKETS];
        for &(c, _) in src {
            offsets[(c >> shift) & mask] += 1;
        }
        let mut sum = 0;
        for o in offsets.iter_mut() {
            let n = *o;
            *o = sum;
            sum += n;
        }
        for &e in src {
            let d = (e.0 >> shift) & mask;
            dst[offsets[d]] = e;
            offsets[d] += 1;
        }
        src_is_entries = !src_is_entries;
    }
    if !src_is_entries {
        entries.copy_from_slice(scratch);
    }
}

/// Intermediate results kept verbatim, one entry per scaled term, with no
/// column-wise merging. Used as the baseline without partial aggregation.
#[derive(Default)]
pub struct RawIntermediates {
    entries: Vec<Entry>,
}

impl RawIntermediates {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Accumulate for RawIntermediates {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn accumulate_scaled_from<S: EntrySource + ?Sized>(
        &mut self,
        scale: f64,
        src: &S,
        start: usize,
        limit: usize,
    ) -> usize {
        src.visit_from(start, |(c, v)| {
            if v == 0.0 {
                return true;
            }
            if self.entries.len() >= limit {
                return false;
            }
            self.entries.push((c, scale * v));
            true
        })
    }

    fn drain_sorted_into(&mut self, out: &mut Vec<Entry>) {
        // Stable: equal columns stay in production order.
        self.entries.sort_by_key(|&(c, _)| c);
        out.append(&mut self.entries);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn radix_sort_matches_comparison_sort() {
        let mut scratch = Vec::new();
        for (len, spread) in [(300usize, 1usize), (1000, 7919), (5000, 1 << 40)] {
            let mut v: Vec<Entry> = (0..len)
                .map(|i| ((i * 2_654_435_761 % len) * spread, i as f64))
                .collect();
            let mut expect = v.clone();
            expect.sort_unstable_by_key(|&(c, _)| c);
            sort_by_column(&mut v, &mut scratch);
            assert_eq!(v, expect);
        }
    }

    fn row(e: &[(usize, f64)]) -> SparseRow {
        SparseRow::new(0, e.to_vec()).unwrap()
    }

    #[test]
    fn accumulate_examples() {
        let mut acc = HashAccumulator::new();
        acc.accumulate(&row(&[(2, 1.0)]));
        assert_eq!(acc.get(2), Some(1.0));
        assert_eq!(acc.len(), 1);

        acc.accumulate(&row(&[(2, 2.0), (7, 1.0)]));
        assert_eq!(acc.drain_sorted(), vec![(2, 3.0), (7, 1.0)]);

        acc.accumulate(&row(&[(0, 1.0)]));
        acc.accumulate(&row(&[(0, -1.0)]));
        assert_eq!(acc.drain_sorted(), vec![(0, 0.0)]);
        assert!(acc.is_empty());
    }

    #[test]
    fn initial_sizing_is_power_of_two_twice_expected() {
        assert_eq!(HashAccumulator::with_expected(100).capacity(), 256);
        assert_eq!(HashAccumulator::with_expected(3).capacity(), 16);
        assert_eq!(HashAccumulator::with_expected(64).capacity(), 128);
    }

    #[test]
    fn grows_by_doubling() {
        let mut acc = HashAccumulator::with_expected(4);
        let cap = acc.capacity();
        for c in 0..cap {
            acc.add(c * 7919, 1.0);
        }
        // Half full at most: 16 entries need 32 slots.
        assert_eq!(acc.capacity(), cap * 2);
        assert_eq!(acc.len(), cap);
        let drained = acc.drain_sorted();
        assert!(drained.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn bounded_accumulate_stops_at_limit_but_merges_existing() {
        let b: Vec<Entry> = vec![(1, 1.0), (2, 1.0), (3, 1.0)];
        let mut acc = HashAccumulator::new();
        assert_eq!(acc.accumulate_scaled_from(2.0, &b, 0, 2), 2);
        assert_eq!(acc.len(), 2);
        // Column 1 already present: merging never grows the accumulator.
        let again: Vec<Entry> = vec![(1, 1.0), (9, 1.0)];
        assert_eq!(acc.accumulate_scaled_from(1.0, &again, 0, 2), 1);
        assert_eq!(acc.get(1), Some(3.0));
    }

    #[test]
    fn zero_source_entries_are_skipped() {
        let b: Vec<Entry> = vec![(1, 0.0), (2, 1.0)];
        let mut acc = HashAccumulator::new();
        acc.accumulate_scaled_from(3.0, &b, 0, usize::MAX);
        assert_eq!(acc.drain_sorted(), vec![(2, 3.0)]);
        let mut raw = RawIntermediates::new();
        raw.accumulate_scaled_from(3.0, &b, 0, usize::MAX);
        assert_eq!(raw.len(), 1);
    }

    #[test]
    fn raw_intermediates_keep_duplicates_in_order() {
        let mut raw = RawIntermediates::new();
        let b: Vec<Entry> = vec![(4, 1.0), (1, 2.0)];
        raw.accumulate_scaled_from(1.0, &b, 0, usize::MAX);
        raw.accumulate_scaled_from(10.0, &b, 0, usize::MAX);
        assert_eq!(raw.accumulate_scaled_from(1.0, &b, 0, 4), 0);
        let mut out = Vec::new();
        raw.drain_sorted_into(&mut out);
        assert_eq!(out, vec![(1, 2.0), (1, 20.0), (4, 1.0), (4, 10.0)]);
        assert!(raw.is_empty());
    }

    proptest! {
        #[test]
        fn no_duplicate_columns_after_any_sequence(
            rows in prop::collection::vec(
                prop::collection::btree_map(0usize..200, -8i32..8, 0..30), 0..20)
        ) {
            let mut acc = HashAccumulator::with_expected(2);
            let mut oracle: BTreeMap<usize, f64> = BTreeMap::new();
            for r in &rows {
                let entries: Vec<Entry> = r.iter().map(|(&c, &v)| (c, v as f64)).collect();
                acc.accumulate(&SparseRow::new(0, entries.clone()).unwrap());
                for (c, v) in entries {
                    *oracle.entry(c).or_insert(0.0) += v;
                }
                prop_assert_eq!(acc.len(), oracle.len());
            }
            let drained = acc.drain_sorted();
            prop_assert!(drained.windows(2).all(|w| w[0].0 < w[1].0));
            let expected: Vec<Entry> = oracle.into_iter().collect();
            prop_assert_eq!(drained, expected);
        }
    }
}
