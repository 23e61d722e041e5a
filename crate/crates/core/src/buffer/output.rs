use crate::matrix::Entry;
use crate::store::ENTRY_BYTES;

/// A row's (possibly partial) result waiting in an output share.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub row_id: usize,
    pub entries: Vec<Entry>,
}

impl Segment {
    pub fn bytes(&self) -> u64 {
        (self.entries.len() * ENTRY_BYTES) as u64
    }
}

#[derive(Debug, PartialEq)]
pub enum StageOutcome {
    Staged,
    /// Staged results plus the new segment exceed the share; the segment is
    /// handed back untouched.
    Overflow(Segment),
}

/// One worker's static share of the output buffer.
///
/// Sizes are serialized entry bytes. The engine also counts the worker's
/// in-flight accumulator against the share, via [`OutputShare::room_entries`].
pub struct OutputShare {
    capacity_bytes: u64,
    staged: Vec<Segment>,
    staged_bytes: u64,
    peak_bytes: u64,
}

impl OutputShare {
    pub fn new(capacity_bytes: u64) -> Self {
        OutputShare {
            capacity_bytes,
            staged: Vec::new(),
            staged_bytes: 0,
            peak_bytes: 0,
        }
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn staged_bytes(&self) -> u64 {
        self.staged_bytes
    }

    pub fn is_empty(&self) -> bool {
        self.staged.is_empty()
    }

    /// Entries an accumulator may still hold beside what is staged.
    pub fn room_entries(&self) -> usize {
        ((self.capacity_bytes - self.staged_bytes) / ENTRY_BYTES as u64) as usize
    }

    /// Largest share usage seen, in-flight bytes included.
    pub fn peak_bytes(&self) -> u64 {
        self.peak_bytes
    }

    /// Records `in_flight` bytes held outside the staged list.
    pub fn observe(&mut self, in_flight: u64) {
        self.peak_bytes = self.peak_bytes.max(self.staged_bytes + in_flight);
    }

    pub fn stage(&mut self, segment: Segment) -> StageOutcome {
        let bytes = segment.bytes();
        if self.staged_bytes + bytes > self.capacity_bytes {
            return StageOutcome::Overflow(segment);
        }
        self.staged_bytes += bytes;
        self.peak_bytes = self.peak_bytes.max(self.staged_bytes);
        self.staged.push(segment);
        StageOutcome::Staged
    }

    /// Empties the share, returning segments in staging order.
    pub fn take_staged(&mut self) -> Vec<Segment> {
        self.staged_bytes = 0;
        std::mem::take(&mut self.staged)
    }
}
