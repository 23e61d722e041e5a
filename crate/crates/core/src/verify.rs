//! Checks of a stored product against its inputs: the dense oracle for small
//! inputs, and streaming checks that scale to inputs of any size.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{spgemm_reference, Entry, HashAccumulator, SparseMatrix};
use crate::store::StoredMatrix;

/// Default cap on entries per input for the dense oracle.
pub const DEFAULT_ORACLE_ENTRIES: u64 = 1_000_000;
/// Cap on densified cells per operand (one GiB of `f64`).
pub const MAX_DENSE_CELLS: u64 = 1 << 27;

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::storage(path, e, 0))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::storage(path, e, 0))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Comparison {
    pub rows_compared: usize,
    pub mismatched_rows: usize,
    pub max_abs_diff: f64,
    /// Description of the first differing row, if any.
    pub first_mismatch: Option<String>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.mismatched_rows == 0
    }

    fn record(&mut self, row: usize, expected: &[Entry], actual: &[Entry], tol: f64) {
        self.rows_compared += 1;
        let same_pattern =
            expected.len() == actual.len() && expected.iter().zip(actual).all(|(e, a)| e.0 == a.0);
        if !same_pattern {
            self.mismatched_rows += 1;
            self.max_abs_diff = f64::INFINITY;
            self.first_mismatch.get_or_insert_with(|| {
                format!(
                    "row {row}: expected {} entries, found {} (columns differ)",
                    expected.len(),
                    actual.len()
                )
            });
            return;
        }
        let worst = expected
            .iter()
            .zip(actual)
            .map(|(e, a)| (e.1 - a.1).abs())
            .fold(0.0f64, f64::max);
        self.max_abs_diff = self.max_abs_diff.max(worst);
        if worst > tol {
            self.mismatched_rows += 1;
            self.first_mismatch
                .get_or_insert_with(|| format!("row {row}: values differ by up to {worst:e}"));
        }
    }
}

/// Row-by-row comparison of two in-memory matrices with absolute tolerance
/// `tol` per entry; sparsity patterns must match exactly.
pub fn compare_matrices(expected: &SparseMatrix, actual: &SparseMatrix, tol: f64) -> Comparison {
    let mut cmp = Comparison::default();
    if (expected.n_rows(), expected.n_cols()) != (actual.n_rows(), actual.n_cols()) {
        cmp.mismatched_rows = 1;
        cmp.max_abs_diff = f64::INFINITY;
        cmp.first_mismatch = Some(format!(
            "shape {}×{} vs {}×{}",
            expected.n_rows(),
            expected.n_cols(),
            actual.n_rows(),
            actual.n_cols()
        ));
        return cmp;
    }
    for (e, a) in expected.rows().iter().zip(actual.rows()) {
        cmp.record(e.row_id(), e.entries(), a.entries(), tol);
    }
    cmp
}

fn guard(m: &StoredMatrix, name: &str, max_entries: u64) -> Result<()> {
    if m.n_entries() > max_entries {
        return Err(Error::InvalidInput(format!(
            "{name} has {} entries, above the oracle limit of {max_entries}",
            m.n_entries()
        )));
    }
    let cells = m.n_rows() as u64 * m.n_cols() as u64;
    if cells > MAX_DENSE_CELLS {
        return Err(Error::InvalidInput(format!(
            "{name} is {}×{}; densifying it for the oracle would need {cells} cells",
            m.n_rows(),
            m.n_cols()
        )));
    }
    Ok(())
}

/// Unpacks `a` and `b`, runs the dense reference product, and compares it
/// with `c`. Inputs above `max_entries` entries (or too large to densify)
/// are refused.
pub fn verify_with_oracle(
    a: &StoredMatrix,
    b: &StoredMatrix,
    c: &StoredMatrix,
    max_entries: u64,
    tol: f64,
) -> Result<Comparison> {
    guard(a, "former input", max_entries)?;
    guard(b, "latter input", max_entries)?;
    let expected = spgemm_reference(&a.to_sparse()?, &b.to_sparse()?)?;
    Ok(compare_matrices(&expected, &c.to_sparse()?, tol))
}

/// Recomputes row `i` of `a × b` straight from the block files, with no
/// caching: one uncached read per row of `b` that the row selects.
pub fn recompute_row(a: &StoredMatrix, b: &StoredMatrix, i: usize) -> Result<Vec<Entry>> {
    let row = a.read_row(i)?;
    let mut acc = HashAccumulator::new();
    for &(j, aij) in row.entries() {
        if aij == 0.0 {
            continue;
        }
        for &(k, bjk) in b.read_row(j)?.entries() {
            if bjk != 0.0 {
                acc.add(k, aij * bjk);
            }
        }
    }
    Ok(acc.drain_sorted())
}

/// `count` distinct row ids below `n_rows` (all of them if fewer), sorted.
pub fn sample_rows(n_rows: usize, count: usize, seed: u64) -> Vec<usize> {
    if count >= n_rows {
        return (0..n_rows).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = BTreeSet::new();
    while picked.len() < count {
        picked.insert(rng.random_range(0..n_rows));
    }
    picked.into_iter().collect()
}

/// Compares the listed rows of `c` with rows recomputed from the inputs.
pub fn verify_rows(
    a: &StoredMatrix,
    b: &StoredMatrix,
    c: &StoredMatrix,
    rows: &[usize],
    tol: f64,
) -> Result<Comparison> {
    let mut cmp = Comparison::default();
    for &i in rows {
        let expected = recompute_row(a, b, i)?;
        let actual = c.read_row(i)?;
        cmp.record(i, &expected, actual.entries(), tol);
    }
    Ok(cmp)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChecksumReport {
    /// Largest |expected − actual| over column sums and row sums.
    pub max_abs_diff: f64,
    /// Tolerance the differences were held to.
    pub tolerance: f64,
    pub column_sum_total: f64,
}

impl ChecksumReport {
    pub fn passed(&self) -> bool {
        self.max_abs_diff <= self.tolerance
    }
}

/// Streaming oracle: checks `1ᵀC = (1ᵀA)B` and `C1 = A(B1)` using one pass
/// over each stored matrix and vectors of one value per row or column.
/// `rel_tol` scales with the sum of absolute contributions, so exact
/// integer data passes with any `rel_tol ≥ 0`.
pub fn column_sum_checksum(
    a: &StoredMatrix,
    b: &StoredMatrix,
    c: &StoredMatrix,
    rel_tol: f64,
) -> Result<ChecksumReport> {
    if a.n_cols() != b.n_rows() || c.n_rows() != a.n_rows() || c.n_cols() != b.n_cols() {
        return Err(Error::DimensionMismatch {
            left_cols: a.n_cols(),
            right_rows: b.n_rows(),
        });
    }
    // 1ᵀA and |A|ᵀ1.
    let mut a_colsum = vec![0.0f64; a.n_cols()];
    let mut a_abs = vec![0.0f64; a.n_cols()];
    for row in a.rows() {
        let row = row?;
        for &(j, v) in row.entries() {
            a_colsum[j] += v;
            a_abs[j] += v.abs();
        }
    }
    // (1ᵀA)B and B1.
    let mut expect_col = vec![0.0f64; b.n_cols()];
    let mut scale_col = vec![0.0f64; b.n_cols()];
    let mut b_rowsum = vec![0.0f64; b.n_rows()];
    let mut b_rowabs = vec![0.0f64; b.n_rows()];
    for row in b.rows() {
        let row = row?;
        let j = row.row_id();
        for &(k, v) in row.entries() {
            expect_col[k] += a_colsum[j] * v;
            scale_col[k] += a_abs[j] * v.abs();
            b_rowsum[j] += v;
            b_rowabs[j] += v.abs();
        }
    }
    // A(B1), second pass over A.
    let mut expect_row = vec![0.0f64; a.n_rows()];
    let mut scale_row = vec![0.0f64; a.n_rows()];
    for row in a.rows() {
        let row = row?;
        let i = row.row_id();
        for &(j, v) in row.entries() {
            expect_row[i] += v * b_rowsum[j];
            scale_row[i] += v.abs() * b_rowabs[j];
        }
    }
    let mut got_col = vec![0.0f64; c.n_cols()];
    let mut got_row = vec![0.0f64; c.n_rows()];
    for row in c.rows() {
        let row = row?;
        for &(k, v) in row.entries() {
            got_col[k] += v;
            got_row[row.row_id()] += v;
        }
    }
    let mut max_abs = 0.0f64;
    let mut max_scale = 0.0f64;
    for (e, (g, s)) in expect_col.iter().zip(got_col.iter().zip(&scale_col)) {
        max_abs = max_abs.max((e - g).abs());
        max_scale = max_scale.max(*s);
    }
    for (e, (g, s)) in expect_row.iter().zip(got_row.iter().zip(&scale_row)) {
        max_abs = max_abs.max((e - g).abs());
        max_scale = max_scale.max(*s);
    }
    Ok(ChecksumReport {
        max_abs_diff: max_abs,
        tolerance: rel_tol * max_scale,
        column_sum_total: got_col.iter().sum(),
    })
}
