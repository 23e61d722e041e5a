//! In-memory sparse rows and matrices, the row-wise product, and a dense
//! reference multiplication used as a test oracle.
//!
//! Output row `i` of `A × B` is the sum over the nonzeros `A(i, j)` of the
//! scaled rows `A(i, j) · B(j, :)`. Every multiplication path in this crate,
//! in memory or out of core, is built from that one identity.

mod accumulator;
mod reference;

pub use accumulator::{Accumulate, EntrySource, HashAccumulator, RawIntermediates};
pub use reference::spgemm_reference;

use crate::error::{Error, Result};

/// One `(column, value)` pair of a sparse row.
pub type Entry = (usize, f64);

/// A single matrix row: column-sorted entries without duplicate columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    row_id: usize,
    entries: Vec<Entry>,
}

impl SparseRow {
    /// Builds a row, rejecting entries that are not strictly sorted by column.
    pub fn new(row_id: usize, entries: Vec<Entry>) -> Result<Self> {
        if let Some(w) = entries.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidInput(format!(
                "row {row_id}: columns must be strictly increasing, found {} then {}",
                w[0].0, w[1].0
            )));
        }
        Ok(SparseRow { row_id, entries })
    }

    /// Caller guarantees the entries are strictly column-sorted.
    pub(crate) fn from_sorted(row_id: usize, entries: Vec<Entry>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseRow { row_id, entries }
    }

    pub fn empty(row_id: usize) -> Self {
        SparseRow {
            row_id,
            entries: Vec::new(),
        }
    }

    pub fn row_id(&self) -> usize {
        self.row_id
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest column index in the row, if any.
    pub fn max_col(&self) -> Option<usize> {
        self.entries.last().map(|&(c, _)| c)
    }
}

/// Multiplies every value of `row` by `s`. A zero scalar yields an empty row,
/// since a zero coefficient contributes no term to the row-wise product.
pub fn scale_row(s: f64, row: &SparseRow) -> SparseRow {
    if s == 0.0 {
        return SparseRow::empty(row.row_id);
    }
    SparseRow {
        row_id: row.row_id,
        entries: row.entries.iter().map(|&(c, v)| (c, v * s)).collect(),
    }
}

/// A row-major sparse matrix holding exactly one [`SparseRow`] per row id.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<SparseRow>,
}

impl SparseMatrix {
    /// Validates that `rows` are numbered `0..n_rows` and every column is in range.
    pub fn new(n_rows: usize, n_cols: usize, rows: Vec<SparseRow>) -> Result<Self> {
        if rows.len() != n_rows {
            return Err(Error::InvalidInput(format!(
                "expected {n_rows} rows, got {}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.row_id != i {
                return Err(Error::InvalidInput(format!(
                    "row at position {i} carries id {}",
                    row.row_id
                )));
            }
            if let Some(c) = row.max_col().filter(|&c| c >= n_cols) {
                return Err(Error::InvalidInput(format!(
                    "row {i} has column {c} outside {n_cols} columns"
                )));
            }
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            rows,
        })
    }

    /// An `n_rows × n_cols` matrix without entries.
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_rows,
            n_cols,
            rows: (0..n_rows).map(SparseRow::empty).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            rows: (0..n)
                .map(|i| SparseRow::from_sorted(i, vec![(i, 1.0)]))
                .collect(),
        }
    }

    /// Assembles a matrix from coordinate triplets. Duplicate coordinates are
    /// summed in input order; nothing is dropped.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut items: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = items.iter().find(|&&(r, c, _)| r >= n_rows || c >= n_cols) {
            return Err(Error::InvalidInput(format!(
                "coordinate ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
            )));
        }
        // Stable, so duplicates keep their input order for summation.
        items.sort_by_key(|&(r, c, _)| (r, c));

        let mut rows: Vec<SparseRow> = (0..n_rows).map(SparseRow::empty).collect();
        for (r, c, v) in items {
            let entries = &mut rows[r].entries;
            match entries.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => entries.push((c, v)),
            }
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            rows,
        })
    }

    /// Builds a matrix from a dense row-major array, keeping nonzero cells.
    pub fn from_dense(n_cols: usize, dense: &[Vec<f64>]) -> Result<Self> {
        let rows = dense
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.len() != n_cols {
                    return Err(Error::InvalidInput(format!(
                        "dense row {i} has {} cells, expected {n_cols}",
                        r.len()
                    )));
                }
                let entries = r
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(c, &v)| (c, v))
                    .collect();
                Ok(SparseRow::from_sorted(i, entries))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SparseMatrix {
            n_rows: dense.len(),
            n_cols,
            rows,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.n_cols];
                for &(c, v) in &row.entries {
                    dense[c] = v;
                }
                dense
            })
            .collect()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_entries(&self) -> usize {
        self.rows.iter().map(SparseRow::len).sum()
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<SparseRow> {
        self.rows
    }

    /// Value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let entries = &self.rows[i].entries;
        entries
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| entries[k].1)
            .unwrap_or(0.0)
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .flat_map(|r| r.entries.iter().map(move |&(c, v)| (r.row_id, c, v)))
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut rows: Vec<SparseRow> = (0..self.n_cols).map(SparseRow::empty).collect();
        // Row-major traversal pushes into each column in increasing row order.
        for (r, c, v) in self.triplets() {
            rows[c].entries.push((r, v));
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            rows,
        }
    }

    /// Multiplies every stored value by `s`, keeping the sparsity pattern.
    pub fn scaled(&self, s: f64) -> SparseMatrix {
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            rows: self
                .rows
                .iter()
                .map(|r| SparseRow {
                    row_id: r.row_id,
                    entries: r.entries.iter().map(|&(c, v)| (c, v * s)).collect(),
                })
                .collect(),
        }
    }

    /// Removes stored entries whose value is exactly zero.
    pub fn without_zeros(mut self) -> SparseMatrix {
        for row in &mut self.rows {
            row.entries.retain(|&(_, v)| v != 0.0);
        }
        self
    }
}

fn check_dims(a: &SparseMatrix, b: &SparseMatrix) -> Result<()> {
    if a.n_cols != b.n_rows {
        return Err(Error::DimensionMismatch {
            left_cols: a.n_cols,
            right_rows: b.n_rows,
        });
    }
    Ok(())
}

/// Row-wise product `A × B` computed entirely in memory with a hash accumulator.
pub fn spgemm_in_memory(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    check_dims(a, b)?;
    let mut acc = HashAccumulator::new();
    let mut rows = Vec::with_capacity(a.n_rows);
    for row in &a.rows {
        for &(j, s) in &row.entries {
            if s == 0.0 {
                continue;
            }
            let b_row = b.rows[j].entries();
            acc.accumulate_scaled_from(s, b_row, 0, usize::MAX);
        }
        let mut out = Vec::with_capacity(acc.len());
        acc.drain_sorted_into(&mut out);
        rows.push(SparseRow::from_sorted(row.row_id, out));
    }
    Ok(SparseMatrix {
        n_rows: a.n_rows,
        n_cols: b.n_cols,
        rows,
    })
}
