//! Dataset ingestion and export: Matrix Market coordinate files, whitespace
//! edge lists, and an external sorter that packs inputs larger than memory.

mod edges;
mod external;
mod mtx;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

pub use edges::{parse_edge_list, read_edge_list};
pub use external::{transpose_stored, TripletSorter, DEFAULT_SORT_ENTRIES};
pub use mtx::{export_coordinate, parse_matrix_market, read_matrix_market, MtxHeader};

use crate::error::{Error, Result};
use crate::store::StoredMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    /// Shift coordinates down by one. `None` uses the format's convention:
    /// one-based for Matrix Market, zero-based for edge lists.
    pub one_indexed: Option<bool>,
    /// Mirror entries: symmetric Matrix Market headers are expanded, and
    /// edge lists gain the reverse of every off-diagonal edge.
    pub symmetrize: bool,
    /// Remove entries whose (summed) value is exactly zero.
    pub drop_explicit_zeros: bool,
    /// Value of pattern-only entries and of edges without a weight.
    pub value_default: f64,
    pub transpose: bool,
    /// Renumber edge-list node ids densely in order of first appearance.
    pub compact_ids: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            one_indexed: None,
            symmetrize: true,
            drop_explicit_zeros: true,
            value_default: 1.0,
            transpose: false,
            compact_ids: false,
        }
    }
}

impl IngestOptions {
    /// Edge lists are directed unless asked otherwise.
    pub fn edge_list() -> Self {
        IngestOptions {
            symmetrize: false,
            ..Self::default()
        }
    }
}

/// Input file formats recognised by [`ingest_file`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    MatrixMarket,
    EdgeList,
}

impl InputFormat {
    /// `.mtx` is Matrix Market; anything else is read as an edge list.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("mtx") => InputFormat::MatrixMarket,
            _ => InputFormat::EdgeList,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(|e| Error::storage(path, e, 0))?;
    Ok(BufReader::with_capacity(1 << 20, f))
}

/// Streams `input` into a block file without holding the whole matrix in
/// memory: entries go through a [`TripletSorter`] that keeps at most
/// `sort_entries` of them in memory at a time.
pub fn ingest_file(
    input: &Path,
    format: InputFormat,
    opts: &IngestOptions,
    block_size: usize,
    output: &Path,
    sort_entries: usize,
) -> Result<StoredMatrix> {
    ingest_reader(open(input)?, format, opts, block_size, output, sort_entries)
}

pub fn ingest_reader<R: BufRead>(
    reader: R,
    format: InputFormat,
    opts: &IngestOptions,
    block_size: usize,
    output: &Path,
    sort_entries: usize,
) -> Result<StoredMatrix> {
    let spill_parent = match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => ".".into(),
    };
    let mut sorter = TripletSorter::new(&spill_parent, sort_entries)?;
    let mut failed = None;
    let mut sink = |r: usize, c: usize, v: f64| {
        if failed.is_none() {
            if let Err(e) = sorter.push(r, c, v) {
                failed = Some(e);
            }
        }
    };
    let (n_rows, n_cols) = match format {
        InputFormat::MatrixMarket => read_matrix_market(reader, opts, &mut sink)?,
        InputFormat::EdgeList => read_edge_list(reader, opts, &mut sink)?,
    };
    if let Some(e) = failed {
        return Err(e);
    }
    sorter.finish(n_rows, n_cols, opts.drop_explicit_zeros, block_size, output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streamed_ingest_matches_in_memory_parse() {
        let dir = tempfile::tempdir().unwrap();
        let text = "%%MatrixMarket matrix coordinate integer symmetric\n% c\n5 5 6\n1 1 2\n3 1 1\n5 2 -4\n3 1 1\n4 4 0\n5 5 7\n";
        let opts = IngestOptions::default();
        let expected = parse_matrix_market(text.as_bytes(), &opts).unwrap();
        for sort_entries in [1, 3, 1000] {
            let out = dir.path().join(format!("m{sort_entries}.blk"));
            let sm = ingest_reader(
                text.as_bytes(),
                InputFormat::MatrixMarket,
                &opts,
                128,
                &out,
                sort_entries,
            )
            .unwrap();
            assert_eq!(sm.to_sparse().unwrap(), expected);
        }
        assert_eq!(expected.get(2, 0), 2.0);
        assert_eq!(expected.get(0, 2), 2.0);
        assert_eq!(expected.n_entries(), 6);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            InputFormat::from_path(Path::new("a/b.MTX")),
            InputFormat::MatrixMarket
        );
        assert_eq!(
            InputFormat::from_path(Path::new("soc-Slashdot.txt")),
            InputFormat::EdgeList
        );
    }
}
