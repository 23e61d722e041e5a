use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::format::{
    check_block_size, encode_entries, encode_object_header, object_bytes, BlockHeader,
    BLOCK_HEADER_BYTES, ENTRY_BYTES, OBJECT_HEADER_BYTES,
};
use super::{Metadata, ObjectIndexTable, StoredMatrix};
use crate::error::{Error, Result};
use crate::matrix::{Entry, SparseMatrix};

/// Streams rows, in ascending row order, into a block file.
///
/// Rows are packed greedily: a row joins the open block when it fits,
/// otherwise the block is sealed and a fresh one started. A row too large for
/// an empty block is cut into maximal fragments over consecutive blocks; its
/// last fragment shares its block with the rows that follow. Row ids skipped
/// between two appends are written as empty rows.
pub struct BlockWriter {
    path: PathBuf,
    out: BufWriter<File>,
    block_size: usize,
    n_cols: usize,
    payload: Vec<u8>,
    objects_in_block: u32,
    block_first_row: usize,
    block_last_row: usize,
    ranges: Vec<(usize, usize)>,
    next_row: usize,
    n_entries: u64,
    max_row_entries: u64,
    bytes_written: u64,
}

impl BlockWriter {
    /// Creates (truncating) the block file at `path`.
    pub fn create(path: impl AsRef<Path>, block_size: usize, n_cols: usize) -> Result<Self> {
        check_block_size(block_size)?;
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::storage(&path, e, 0))?;
        Ok(BlockWriter {
            path,
            out: BufWriter::with_capacity(block_size.clamp(8 << 10, 1 << 20), file),
            block_size,
            n_cols,
            payload: Vec::with_capacity(block_size - BLOCK_HEADER_BYTES),
            objects_in_block: 0,
            block_first_row: 0,
            block_last_row: 0,
            ranges: Vec::new(),
            next_row: 0,
            n_entries: 0,
            max_row_entries: 0,
            bytes_written: 0,
        })
    }

    fn capacity(&self) -> usize {
        self.block_size - BLOCK_HEADER_BYTES
    }

    /// Blocks sealed so far.
    pub fn blocks_written(&self) -> u64 {
        self.ranges.len() as u64
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes_written
    }

    /// Next row id the writer expects.
    pub fn next_row(&self) -> usize {
        self.next_row
    }

    /// Appends row `row_id`. Entries must be strictly column-sorted.
    pub fn append_row(&mut self, row_id: usize, entries: &[Entry]) -> Result<()> {
        if row_id < self.next_row {
            return Err(Error::InvalidInput(format!(
                "row {row_id} appended after row {}",
                self.next_row - 1
            )));
        }
        if let Some(&(c, _)) = entries.last() {
            if c >= self.n_cols {
                return Err(Error::InvalidInput(format!(
                    "row {row_id} has column {c} outside {} columns",
                    self.n_cols
                )));
            }
        }
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        while self.next_row < row_id {
            self.place(self.next_row, &[])?;
            self.next_row += 1;
        }
        self.place(row_id, entries)?;
        self.next_row = row_id + 1;
        self.n_entries += entries.len() as u64;
        self.max_row_entries = self.max_row_entries.max(entries.len() as u64);
        Ok(())
    }

    fn place(&mut self, row_id: usize, entries: &[Entry]) -> Result<()> {
        let size = object_bytes(entries.len());
        if self.payload.len() + size <= self.capacity() {
            self.push_object(row_id, 0, 1, entries);
            return Ok(());
        }
        if self.objects_in_block > 0 {
            self.seal()?;
        }
        if size <= self.capacity() {
            self.push_object(row_id, 0, 1, entries);
            return Ok(());
        }
        let per_block = (self.capacity() - OBJECT_HEADER_BYTES) / ENTRY_BYTES;
        let fragments: Vec<&[Entry]> = entries.chunks(per_block).collect();
        let count = u32::try_from(fragments.len())
            .map_err(|_| Error::InvalidInput(format!("row {row_id} needs too many fragments")))?;
        for (k, fragment) in fragments.iter().enumerate() {
            self.push_object(row_id, k as u32, count, fragment);
            if k + 1 < fragments.len() {
                self.seal()?;
            }
        }
        Ok(())
    }

    fn push_object(&mut self, row_id: usize, index: u32, count: u32, entries: &[Entry]) {
        if self.objects_in_block == 0 {
            self.block_first_row = row_id;
        }
        self.block_last_row = row_id;
        encode_object_header(&mut self.payload, row_id, index, count, entries.len());
        encode_entries(&mut self.payload, entries);
        self.objects_in_block += 1;
    }

    fn seal(&mut self) -> Result<()> {
        let mut header = BlockHeader {
            block_index: self.ranges.len() as u64,
            object_count: self.objects_in_block,
            payload_bytes: self.payload.len() as u32,
            checksum: 0,
        };
        header.checksum = header.compute_checksum(&self.payload);
        let padding = self.block_size - BLOCK_HEADER_BYTES - self.payload.len();
        self.payload.resize(self.payload.len() + padding, 0);
        let bs = self.block_size as u64;
        self.out
            .write_all(&header.encode())
            .and_then(|()| self.out.write_all(&self.payload))
            .map_err(|e| Error::storage(&self.path, e, bs))?;
        self.bytes_written += bs;
        self.ranges
            .push((self.block_first_row, self.block_last_row));
        self.payload.clear();
        self.objects_in_block = 0;
        Ok(())
    }

    /// Pads with empty rows up to `n_rows`, flushes, writes the metadata
    /// sidecar, and reopens the result for reading.
    pub fn finish(mut self, n_rows: usize) -> Result<StoredMatrix> {
        if n_rows < self.next_row {
            return Err(Error::InvalidInput(format!(
                "finishing with {n_rows} rows after writing row {}",
                self.next_row - 1
            )));
        }
        while self.next_row < n_rows {
            self.place(self.next_row, &[])?;
            self.next_row += 1;
        }
        if self.objects_in_block > 0 {
            self.seal()?;
        }
        let attempted = self.block_size as u64;
        self.out
            .flush()
            .map_err(|e| Error::storage(&self.path, e, attempted))?;
        let meta = Metadata::new(
            n_rows,
            self.n_cols,
            self.n_entries,
            self.block_size,
            self.max_row_entries,
            ObjectIndexTable::new(self.ranges),
        );
        meta.write(&self.path)?;
        let stored = StoredMatrix::open(&self.path)?;
        stored.set_write_count(meta.block_count as u64);
        Ok(stored)
    }
}

/// Writes `m` as a block file at `path` plus its metadata sidecar.
pub fn pack_matrix(
    m: &SparseMatrix,
    block_size: usize,
    path: impl AsRef<Path>,
) -> Result<StoredMatrix> {
    let mut w = BlockWriter::create(path, block_size, m.n_cols())?;
    for row in m.rows() {
        w.append_row(row.row_id(), row.entries())?;
    }
    w.finish(m.n_rows())
}
