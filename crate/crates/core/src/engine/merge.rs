use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::vec;

use super::spill::{RunReader, SpillFile};
use crate::buffer::{IoStats, Segment};
use crate::error::{Error, Result};
use crate::matrix::Entry;

/// One worker's results in row order: its spill runs, then what was still
/// staged when it finished.
pub struct SegmentStream<'s> {
    runs: Option<RunReader<'s>>,
    current: vec::IntoIter<Segment>,
    staged: vec::IntoIter<Segment>,
    last_row: usize,
}

impl<'s> SegmentStream<'s> {
    pub fn new(
        spill: Option<&SpillFile>,
        staged: Vec<Segment>,
        stats: &'s IoStats,
    ) -> Result<Self> {
        Ok(SegmentStream {
            runs: spill.map(|f| RunReader::open(f, stats)).transpose()?,
            current: Vec::new().into_iter(),
            staged: staged.into_iter(),
            last_row: 0,
        })
    }

    pub fn staged_only(staged: Vec<Segment>) -> Self {
        SegmentStream {
            runs: None,
            current: Vec::new().into_iter(),
            staged: staged.into_iter(),
            last_row: 0,
        }
    }

    fn next_segment(&mut self) -> Result<Option<Segment>> {
        loop {
            if let Some(s) = self.current.next() {
                return self.checked(s).map(Some);
            }
            match self.runs.as_mut() {
                Some(reader) => match reader.next_run()? {
                    Some(run) => self.current = run.into_iter(),
                    None => self.runs = None,
                },
                None => return self.staged.next().map(|s| self.checked(s)).transpose(),
            }
        }
    }

    fn checked(&mut self, s: Segment) -> Result<Segment> {
        if s.row_id < self.last_row {
            return Err(Error::format(format!(
                "segment for row {} follows row {}",
                s.row_id, self.last_row
            )));
        }
        self.last_row = s.row_id;
        Ok(s)
    }
}

/// Sums the entries of `parts` column-wise. Contributions to one column are
/// added in the order given, so the result depends only on that order.
pub fn combine(parts: Vec<Vec<Entry>>) -> Vec<Entry> {
    let mut parts = parts.into_iter().filter(|p| !p.is_empty());
    let Some(first) = parts.next() else {
        return Vec::new();
    };
    let mut all = first;
    let mut single = true;
    for p in parts {
        all.extend(p);
        single = false;
    }
    if single && all.windows(2).all(|w| w[0].0 < w[1].0) {
        return all;
    }
    all.sort_by_key(|e| e.0); // stable
    let mut out: Vec<Entry> = Vec::with_capacity(all.len());
    for (c, v) in all {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

/// k-way merge of `streams` by row. Every row present in any stream is
/// emitted once, in ascending order, with its segments combined by
/// [`combine`] in stream order. Returns the number of rows emitted.
pub fn merge_spills<F>(mut streams: Vec<SegmentStream<'_>>, mut emit: F) -> Result<usize>
where
    F: FnMut(usize, Vec<Entry>) -> Result<()>,
{
    let mut heads: Vec<Option<Segment>> = Vec::with_capacity(streams.len());
    let mut heap = BinaryHeap::new();
    for (k, s) in streams.iter_mut().enumerate() {
        let head = s.next_segment()?;
        if let Some(h) = &head {
            heap.push(Reverse((h.row_id, k)));
        }
        heads.push(head);
    }
    let mut rows = 0;
    let mut group: Vec<usize> = Vec::new();
    while let Some(&Reverse((row, _))) = heap.peek() {
        group.clear();
        while let Some(&Reverse((r, k))) = heap.peek() {
            if r != row {
                break;
            }
            heap.pop();
            group.push(k);
        }
        group.sort_unstable();
        let mut parts = Vec::new();
        for &k in &group {
            while let Some(seg) = heads[k].take_if(|s| s.row_id == row) {
                parts.push(seg.entries);
                heads[k] = streams[k].next_segment()?;
            }
            if let Some(h) = &heads[k] {
                heap.push(Reverse((h.row_id, k)));
            }
        }
        emit(row, combine(parts))?;
        rows += 1;
    }
    Ok(rows)
}
