//! The storage layer: matrices kept on disk as files of fixed-size blocks.
//!
//! Each stored matrix is a block file (layout in [`format`]) plus a JSON
//! metadata sidecar at `<block file>.meta.json` holding the dimensions, the
//! block size, and the object index table. The table records, per block, the
//! first and last row id it holds; it is small enough to pin in memory and
//! is the only structure needed to find the block that holds a given row.

pub mod format;
mod writer;

use std::fs::{self, File};
#[cfg(unix)]
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use format::{Block, EntryBytes, ObjectMeta, DEFAULT_BLOCK_SIZE, ENTRY_BYTES, MIN_BLOCK_SIZE};
pub use writer::{pack_matrix, BlockWriter};

use crate::error::{Error, Result};
use crate::matrix::{Entry, SparseMatrix, SparseRow};

/// Per-block `(first_row, last_row)` ranges, in block order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ObjectIndexTable {
    ranges: Vec<(usize, usize)>,
}

impl ObjectIndexTable {
    pub fn new(ranges: Vec<(usize, usize)>) -> Self {
        ObjectIndexTable { ranges }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    /// Size of the table as two `u64` per block.
    pub fn table_bytes(&self) -> usize {
        self.ranges.len() * 16
    }

    /// Smallest block index whose range contains `row`.
    pub fn locate(&self, row: usize) -> Result<usize> {
        let k = self.ranges.partition_point(|&(_, last)| last < row);
        match self.ranges.get(k) {
            Some(&(first, last)) if first <= row && row <= last => Ok(k),
            _ => Err(Error::RowNotFound { row }),
        }
    }

    /// Linear scan equivalent of [`locate`](Self::locate).
    pub fn locate_linear(&self, row: usize) -> Result<usize> {
        self.ranges
            .iter()
            .position(|&(first, last)| first <= row && row <= last)
            .ok_or(Error::RowNotFound { row })
    }

    /// Checks ordering and that the ranges cover rows `0..n_rows` without gaps.
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        let mut expected_next = 0usize;
        for (k, &(first, last)) in self.ranges.iter().enumerate() {
            if first > last {
                return Err(Error::format(format!(
                    "object index entry {k} has first > last"
                )));
            }
            // A block starts either with the continuation of the previous
            // block's last (split) row or with the next row.
            let continues = k > 0 && first + 1 == expected_next;
            if first != expected_next && !continues {
                return Err(Error::format(format!(
                    "object index entry {k} starts at row {first}, expected {expected_next}"
                )));
            }
            expected_next = last + 1;
        }
        if expected_next != n_rows {
            return Err(Error::format(format!(
                "object index covers {expected_next} rows, matrix has {n_rows}"
            )));
        }
        Ok(())
    }
}

pub const METADATA_FORMAT: &str = "oocgemm-block-store";
pub const METADATA_VERSION: u32 = 1;

/// Contents of the metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub format: String,
    pub version: u32,
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_entries: u64,
    pub block_size: usize,
    pub block_count: usize,
    pub max_row_entries: u64,
    pub object_index: ObjectIndexTable,
}

impl Metadata {
    pub(crate) fn new(
        n_rows: usize,
        n_cols: usize,
        n_entries: u64,
        block_size: usize,
        max_row_entries: u64,
        object_index: ObjectIndexTable,
    ) -> Self {
        Metadata {
            format: METADATA_FORMAT.to_string(),
            version: METADATA_VERSION,
            n_rows,
            n_cols,
            n_entries,
            block_size,
            block_count: object_index.len(),
            max_row_entries,
            object_index,
        }
    }

    pub(crate) fn write(&self, block_file: &Path) -> Result<()> {
        let path = sidecar_path(block_file);
        let text = serde_json::to_string_pretty(self).expect("metadata serializes");
        fs::write(&path, text).map_err(|e| Error::storage(&path, e, 0))
    }

    pub fn read(block_file: &Path) -> Result<Metadata> {
        let path = sidecar_path(block_file);
        let text = fs::read_to_string(&path).map_err(|e| Error::storage(&path, e, 0))?;
        let meta: Metadata = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("metadata {}: {e}", path.display())))?;
        if meta.format != METADATA_FORMAT || meta.version != METADATA_VERSION {
            return Err(Error::format(format!(
                "metadata {}: unsupported format {} v{}",
                path.display(),
                meta.format,
                meta.version
            )));
        }
        if meta.block_count != meta.object_index.len() {
            return Err(Error::format(
                "metadata block count disagrees with its index table",
            ));
        }
        meta.object_index.validate(meta.n_rows)?;
        Ok(meta)
    }
}

/// Path of the metadata sidecar belonging to `block_file`.
pub fn sidecar_path(block_file: &Path) -> PathBuf {
    let mut s = block_file.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// An on-disk matrix opened for block reads.
///
/// Block reads are positional, so one `StoredMatrix` can serve concurrent
/// readers; the read counter is atomic.
#[derive(Debug)]
pub struct StoredMatrix {
    path: PathBuf,
    file: File,
    meta: Metadata,
    reads: AtomicU64,
    writes: AtomicU64,
}

impl StoredMatrix {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let meta = Metadata::read(&path)?;
        format::check_block_size(meta.block_size)?;
        let file = File::open(&path).map_err(|e| Error::storage(&path, e, 0))?;
        let len = file
            .metadata()
            .map_err(|e| Error::storage(&path, e, 0))?
            .len();
        let expected = (meta.block_count * meta.block_size) as u64;
        if len != expected {
            return Err(Error::format(format!(
                "{}: file is {len} bytes, metadata implies {expected}",
                path.display()
            )));
        }
        Ok(StoredMatrix {
            path,
            file,
            meta,
            reads: AtomicU64::new(0),
            writes: AtomicU64::new(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn metadata(&self) -> &Metadata {
        &self.meta
    }

    pub fn n_rows(&self) -> usize {
        self.meta.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.meta.n_cols
    }

    pub fn n_entries(&self) -> u64 {
        self.meta.n_entries
    }

    pub fn block_size(&self) -> usize {
        self.meta.block_size
    }

    pub fn block_count(&self) -> usize {
        self.meta.block_count
    }

    pub fn table(&self) -> &ObjectIndexTable {
        &self.meta.object_index
    }

    pub fn file_bytes(&self) -> u64 {
        (self.meta.block_count * self.meta.block_size) as u64
    }

    pub fn sidecar_bytes(&self) -> Result<u64> {
        let p = sidecar_path(&self.path);
        Ok(fs::metadata(&p)
            .map_err(|e| Error::storage(&p, e, 0))?
            .len())
    }

    pub fn read_count(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    /// Blocks written when this matrix was produced (zero when merely opened).
    pub fn write_count(&self) -> u64 {
        self.writes.load(Ordering::Relaxed)
    }

    pub(crate) fn set_write_count(&self, n: u64) {
        self.writes.store(n, Ordering::Relaxed);
    }

    pub fn reset_read_count(&self) {
        self.reads.store(0, Ordering::Relaxed);
    }

    pub fn locate_block(&self, row: usize) -> Result<usize> {
        self.meta.object_index.locate(row)
    }

    /// Reads and verifies one block, counting it as one block read.
    pub fn read_block(&self, index: usize) -> Result<Block> {
        if index >= self.meta.block_count {
            return Err(Error::InvalidInput(format!(
                "block {index} out of range ({} blocks)",
                self.meta.block_count
            )));
        }
        let mut raw = vec![0u8; self.meta.block_size];
        let offset = (index * self.meta.block_size) as u64;
        read_exact_at(&self.file, &mut raw, offset)
            .map_err(|e| Error::storage(&self.path, e, 0))?;
        self.reads.fetch_add(1, Ordering::Relaxed);
        Block::decode(raw, index)
    }

    /// Reads row `row` straight from the file, bypassing any cache.
    pub fn read_row(&self, row: usize) -> Result<SparseRow> {
        if row >= self.meta.n_rows {
            return Err(Error::RowNotFound { row });
        }
        let mut k = self.locate_block(row)?;
        let mut entries = Vec::new();
        loop {
            let block = self.read_block(k)?;
            let pos = block
                .find(row)
                .ok_or_else(|| Error::format(format!("row {row} missing from block {k}")))?;
            let obj = block.objects()[pos];
            entries.extend(block.entries(&obj).iter());
            if obj.is_last_fragment() {
                break;
            }
            k += 1;
        }
        SparseRow::new(row, entries)
    }

    /// Streams every row in order.
    pub fn rows(&self) -> RowStream<'_> {
        RowStream {
            stored: self,
            next_block: 0,
            current: None,
            position: 0,
            next_row: 0,
        }
    }

    /// Loads the whole matrix into memory, validating it along the way.
    pub fn to_sparse(&self) -> Result<SparseMatrix> {
        let rows = self.rows().collect::<Result<Vec<_>>>()?;
        SparseMatrix::new(self.meta.n_rows, self.meta.n_cols, rows)
    }

    /// Deletes the block file and its sidecar.
    pub fn remove(self) -> Result<()> {
        let side = sidecar_path(&self.path);
        drop(self.file);
        fs::remove_file(&self.path).map_err(|e| Error::storage(&self.path, e, 0))?;
        fs::remove_file(&side).map_err(|e| Error::storage(&side, e, 0))
    }
}

#[cfg(unix)]
fn read_exact_at(file: &File, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
    file.read_exact_at(buf, offset)
}

#[cfg(not(unix))]
fn read_exact_at(file: &File, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = file.try_clone()?;
    f.seek(SeekFrom::Start(offset))?;
    f.read_exact(buf)
}

/// Sequential row reader produced by [`StoredMatrix::rows`].
pub struct RowStream<'a> {
    stored: &'a StoredMatrix,
    next_block: usize,
    current: Option<Block>,
    position: usize,
    next_row: usize,
}

impl RowStream<'_> {
    fn next_object(&mut self) -> Result<Option<(ObjectMeta, Vec<Entry>)>> {
        loop {
            if let Some(block) = &self.current {
                if let Some(&obj) = block.objects().get(self.position) {
                    self.position += 1;
                    return Ok(Some((obj, block.entries(&obj).to_vec())));
                }
            }
            if self.next_block >= self.stored.block_count() {
                return Ok(None);
            }
            self.current = Some(self.stored.read_block(self.next_block)?);
            self.next_block += 1;
            self.position = 0;
        }
    }

    fn next_row(&mut self) -> Result<Option<SparseRow>> {
        let Some((first, mut entries)) = self.next_object()? else {
            if self.next_row != self.stored.n_rows() {
                return Err(Error::format(format!(
                    "block file ends at row {}, expected {} rows",
                    self.next_row,
                    self.stored.n_rows()
                )));
            }
            return Ok(None);
        };
        if first.row_id != self.next_row || first.fragment_index != 0 {
            return Err(Error::format(format!(
                "expected start of row {}, found row {} fragment {}",
                self.next_row, first.row_id, first.fragment_index
            )));
        }
        for k in 1..first.fragment_count {
            let (obj, more) = self.next_object()?.ok_or_else(|| {
                Error::format(format!(
                    "row {} truncated after fragment {}",
                    first.row_id,
                    k - 1
                ))
            })?;
            if obj.row_id != first.row_id
                || obj.fragment_index != k
                || obj.fragment_count != first.fragment_count
            {
                return Err(Error::format(format!(
                    "row {}: fragment {k} missing or out of order",
                    first.row_id
                )));
            }
            entries.extend(more);
        }
        self.next_row += 1;
        let row = SparseRow::new(first.row_id, entries)?;
        if let Some(c) = row.max_col().filter(|&c| c >= self.stored.n_cols()) {
            return Err(Error::format(format!(
                "row {}: column {c} out of range",
                row.row_id()
            )));
        }
        Ok(Some(row))
    }
}

impl Iterator for RowStream<'_> {
    type Item = Result<SparseRow>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_row().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::format::{object_bytes, BLOCK_HEADER_BYTES};
    use super::*;

    fn dense_row_matrix(rows: usize, per_row: usize) -> SparseMatrix {
        let n_cols = per_row.max(1);
        SparseMatrix::from_triplets(
            rows,
            n_cols,
            (0..rows).flat_map(|r| (0..per_row).map(move |c| (r, c, (r * 100 + c + 1) as f64))),
        )
        .unwrap()
    }

    /// Block size whose payload holds exactly `entries` entries plus `objects` object headers.
    fn block_for(entries: usize, objects: usize) -> usize {
        BLOCK_HEADER_BYTES + object_bytes(0) * objects + entries * ENTRY_BYTES
    }

    #[test]
    fn greedy_packing_of_equal_rows() {
        // Five rows of ten entries; each block holds two rows but not three.
        let dir = tempfile::tempdir().unwrap();
        let m = dense_row_matrix(5, 10);
        let bs = block_for(20, 2) + 100;
        assert!(bs < BLOCK_HEADER_BYTES + 3 * object_bytes(10));
        let sm = pack_matrix(&m, bs, dir.path().join("a.blk")).unwrap();
        assert_eq!(sm.table().ranges(), &[(0, 1), (2, 3), (4, 4)]);
        assert_eq!(sm.write_count(), 3);
        assert_eq!(sm.file_bytes(), 3 * bs as u64);

        let block = sm.read_block(1).unwrap();
        let ids: Vec<usize> = block.objects().iter().map(|o| o.row_id).collect();
        assert_eq!(ids, vec![2, 3]);
        assert_eq!(sm.read_count(), 1);
        assert_eq!(sm.to_sparse().unwrap(), m);
    }

    #[test]
    fn oversized_row_is_split_into_maximal_fragments() {
        let dir = tempfile::tempdir().unwrap();
        let m = dense_row_matrix(1, 100);
        let bs = block_for(40, 1);
        let sm = pack_matrix(&m, bs, dir.path().join("a.blk")).unwrap();
        assert_eq!(sm.table().ranges(), &[(0, 0), (0, 0), (0, 0)]);
        let counts: Vec<(u32, u32, usize)> = (0..3)
            .map(|k| {
                let o = sm.read_block(k).unwrap().objects()[0];
                (o.fragment_index, o.fragment_count, o.entry_count)
            })
            .collect();
        assert_eq!(counts, vec![(0, 3, 40), (1, 3, 40), (2, 3, 20)]);
        assert_eq!(sm.locate_block(0).unwrap(), 0);
        assert_eq!(sm.read_row(0).unwrap(), m.row(0).clone());
        assert_eq!(sm.to_sparse().unwrap(), m);
    }

    #[test]
    fn empty_matrix_is_one_block_of_empty_objects() {
        let dir = tempfile::tempdir().unwrap();
        let m = SparseMatrix::zeros(4, 3);
        let sm = pack_matrix(&m, DEFAULT_BLOCK_SIZE, dir.path().join("z.blk")).unwrap();
        assert_eq!(sm.block_count(), 1);
        assert_eq!(sm.read_block(0).unwrap().objects().len(), 4);
        assert_eq!(sm.table().ranges(), &[(0, 3)]);
        assert_eq!(sm.to_sparse().unwrap(), m);
    }

    #[test]
    fn zero_row_matrix_has_no_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let w = BlockWriter::create(dir.path().join("e.blk"), 4096, 0).unwrap();
        let sm = w.finish(0).unwrap();
        assert_eq!(sm.block_count(), 0);
        assert_eq!(sm.to_sparse().unwrap(), SparseMatrix::zeros(0, 0));
    }

    #[test]
    fn locate_examples() {
        let t = ObjectIndexTable::new(vec![(0, 1), (2, 3), (4, 4)]);
        assert_eq!(t.locate(2).unwrap(), 1);
        let split = ObjectIndexTable::new(vec![(0, 0), (0, 0), (0, 0)]);
        assert_eq!(split.locate(0).unwrap(), 0);
        let t = ObjectIndexTable::new(vec![(0, 3), (4, 6)]);
        assert!(matches!(t.locate(7), Err(Error::RowNotFound { row: 7 })));
        // A split row shared between the end of one block and the next.
        let t = ObjectIndexTable::new(vec![(0, 2), (2, 2), (2, 5)]);
        assert_eq!(t.locate(2).unwrap(), 0);
        assert_eq!(t.locate(3).unwrap(), 2);
        for r in 0..6 {
            assert_eq!(t.locate(r).unwrap(), t.locate_linear(r).unwrap());
        }
    }

    #[test]
    fn table_validation() {
        assert!(ObjectIndexTable::new(vec![(0, 1), (2, 3)])
            .validate(4)
            .is_ok());
        assert!(ObjectIndexTable::new(vec![(0, 1), (1, 3)])
            .validate(4)
            .is_ok());
        assert!(ObjectIndexTable::new(vec![(0, 1), (3, 3)])
            .validate(4)
            .is_err());
        assert!(ObjectIndexTable::new(vec![(1, 1)]).validate(2).is_err());
        assert!(ObjectIndexTable::new(vec![(0, 1)]).validate(3).is_err());
        assert!(ObjectIndexTable::default().validate(0).is_ok());
    }

    #[test]
    fn writer_rejects_out_of_order_and_fills_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = BlockWriter::create(dir.path().join("o.blk"), 4096, 8).unwrap();
        w.append_row(2, &[(1, 1.0)]).unwrap();
        assert!(w.append_row(1, &[]).is_err());
        assert!(w.append_row(3, &[(8, 1.0)]).is_err());
        let sm = w.finish(5).unwrap();
        let m = sm.to_sparse().unwrap();
        assert_eq!(m.n_rows(), 5);
        assert_eq!(m.n_entries(), 1);
        assert_eq!(m.get(2, 1), 1.0);
    }

    #[test]
    fn bad_block_size_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = SparseMatrix::identity(2);
        let err = pack_matrix(&m, MIN_BLOCK_SIZE - 1, dir.path().join("x.blk")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn unwritable_path_is_a_storage_error() {
        let m = SparseMatrix::identity(2);
        let err = pack_matrix(&m, 4096, "/nonexistent-dir/x.blk").unwrap_err();
        assert!(matches!(err, Error::Storage { .. }), "{err}");
    }

    #[test]
    fn corrupted_file_fails_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.blk");
        let m = dense_row_matrix(3, 4);
        drop(pack_matrix(&m, 4096, &path).unwrap());
        let mut bytes = fs::read(&path).unwrap();
        bytes[BLOCK_HEADER_BYTES + 30] ^= 1;
        fs::write(&path, bytes).unwrap();
        let sm = StoredMatrix::open(&path).unwrap();
        assert!(matches!(sm.read_block(0), Err(Error::Format { .. })));
        assert!(matches!(sm.read_block(1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn truncated_file_is_rejected_on_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.blk");
        drop(pack_matrix(&dense_row_matrix(3, 4), 4096, &path).unwrap());
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..100]).unwrap();
        assert!(matches!(
            StoredMatrix::open(&path),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn sidecar_is_self_describing_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.blk");
        let sm = pack_matrix(&dense_row_matrix(5, 10), block_for(20, 2) + 100, &path).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(v["format"], METADATA_FORMAT);
        assert_eq!(v["n_rows"], 5);
        assert_eq!(v["n_entries"], 50);
        assert_eq!(
            v["object_index"],
            serde_json::json!([[0, 1], [2, 3], [4, 4]])
        );
        assert_eq!(sm.metadata().max_row_entries, 10);
    }
}
