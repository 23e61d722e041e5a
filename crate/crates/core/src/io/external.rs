use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Entry;
use crate::store::{BlockWriter, StoredMatrix};

/// Triplets held in memory by default before a sorted run goes to disk.
pub const DEFAULT_SORT_ENTRIES: usize = 4 << 20;

const RECORD_BYTES: usize = 24;

type Triplet = (usize, usize, f64);

/// External sort of `(row, col, value)` triplets into a block file.
///
/// At most `chunk` triplets are buffered; each full buffer is stably sorted
/// by (row, col) and written as a run to a temporary directory. Finishing
/// merges the runs and sums duplicates in insertion order.
pub struct TripletSorter {
    chunk: usize,
    buf: Vec<Triplet>,
    dir: tempfile::TempDir,
    runs: Vec<PathBuf>,
}

impl TripletSorter {
    pub fn new(tmp_parent: &Path, chunk: usize) -> Result<Self> {
        let dir = tempfile::Builder::new()
            .prefix("oocgemm-sort-")
            .tempdir_in(tmp_parent)
            .map_err(|e| Error::storage(tmp_parent, e, 0))?;
        Ok(TripletSorter {
            chunk: chunk.max(1),
            buf: Vec::new(),
            dir,
            runs: Vec::new(),
        })
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        self.buf.push((row, col, value));
        if self.buf.len() >= self.chunk {
            self.spill()?;
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    fn spill(&mut self) -> Result<()> {
        self.buf.sort_by_key(|t| (t.0, t.1));
        let path = self.dir.path().join(format!("run-{}", self.runs.len()));
        let file = File::create(&path).map_err(|e| Error::storage(&path, e, 0))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        let bytes = (self.buf.len() * RECORD_BYTES) as u64;
        for &(r, c, v) in &self.buf {
            let mut rec = [0u8; RECORD_BYTES];
            rec[0..8].copy_from_slice(&(r as u64).to_le_bytes());
            rec[8..16].copy_from_slice(&(c as u64).to_le_bytes());
            rec[16..24].copy_from_slice(&v.to_le_bytes());
            out.write_all(&rec)
                .map_err(|e| Error::storage(&path, e, bytes))?;
        }
        out.flush().map_err(|e| Error::storage(&path, e, bytes))?;
        self.runs.push(path);
        self.buf.clear();
        Ok(())
    }

    /// Writes the sorted, summed triplets as an `n_rows × n_cols` block file.
    pub fn finish(
        mut self,
        n_rows: usize,
        n_cols: usize,
        drop_zeros: bool,
        block_size: usize,
        path: &Path,
    ) -> Result<StoredMatrix> {
        let mut writer = BlockWriter::create(path, block_size, n_cols)?;
        let mut rows = RowBuilder::new(drop_zeros);
        if self.runs.is_empty() {
            self.buf.sort_by_key(|t| (t.0, t.1));
            for &t in &self.buf {
                rows.add(t, &mut writer, n_rows)?;
            }
        } else {
            if !self.buf.is_empty() {
                self.spill()?;
            }
            self.buf = Vec::new();
            let mut readers = self
                .runs
                .iter()
                .map(|p| RunFile::open(p))
                .collect::<Result<Vec<_>>>()?;
            let mut heap = BinaryHeap::new();
            for (k, r) in readers.iter_mut().enumerate() {
                if let Some(t) = r.next()? {
                    heap.push(Reverse(((t.0, t.1, k), t.2.to_bits())));
                }
            }
            while let Some(Reverse(((r, c, k), bits))) = heap.pop() {
                rows.add((r, c, f64::from_bits(bits)), &mut writer, n_rows)?;
                if let Some(t) = readers[k].next()? {
                    heap.push(Reverse(((t.0, t.1, k), t.2.to_bits())));
                }
            }
        }
        rows.flush(&mut writer)?;
        writer.finish(n_rows)
    }
}

/// Groups sorted triplets into rows, summing equal coordinates.
struct RowBuilder {
    drop_zeros: bool,
    row: Option<usize>,
    entries: Vec<Entry>,
}

impl RowBuilder {
    fn new(drop_zeros: bool) -> Self {
        RowBuilder {
            drop_zeros,
            row: None,
            entries: Vec::new(),
        }
    }

    fn add(&mut self, (r, c, v): Triplet, w: &mut BlockWriter, n_rows: usize) -> Result<()> {
        if r >= n_rows {
            return Err(Error::InvalidInput(format!(
                "row {r} outside {n_rows} rows"
            )));
        }
        if self.row != Some(r) {
            self.flush(w)?;
            self.row = Some(r);
        }
        match self.entries.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => self.entries.push((c, v)),
        }
        Ok(())
    }

    fn flush(&mut self, w: &mut BlockWriter) -> Result<()> {
        if let Some(r) = self.row.take() {
            if self.drop_zeros {
                self.entries.retain(|e| e.1 != 0.0);
            }
            w.append_row(r, &self.entries)?;
            self.entries.clear();
        }
        Ok(())
    }
}

struct RunFile {
    path: PathBuf,
    input: BufReader<File>,
}

impl RunFile {
    fn open(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::storage(path, e, 0))?;
        Ok(RunFile {
            path: path.to_path_buf(),
            input: BufReader::with_capacity(256 << 10, f),
        })
    }

    fn next(&mut self) -> Result<Option<Triplet>> {
        let mut rec = [0u8; RECORD_BYTES];
        match self.input.read_exact(&mut rec) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(Error::storage(&self.path, e, 0)),
        }
        let word = |at: usize| u64::from_le_bytes(rec[at..at + 8].try_into().expect("8 bytes"));
        Ok(Some((
            word(0) as usize,
            word(8) as usize,
            f64::from_bits(word(16)),
        )))
    }
}

/// Materializes the transpose of `m` as a new block file, reading `m` row by
/// row and sorting externally with at most `sort_entries` triplets in memory.
pub fn transpose_stored(
    m: &StoredMatrix,
    block_size: usize,
    path: &Path,
    sort_entries: usize,
) -> Result<StoredMatrix> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => ".".into(),
    };
    let mut sorter = TripletSorter::new(&parent, sort_entries)?;
    for row in m.rows() {
        let row = row?;
        for &(c, v) in row.entries() {
            sorter.push(c, row.row_id(), v)?;
        }
    }
    sorter.finish(m.n_cols(), m.n_rows(), false, block_size, path)
}
