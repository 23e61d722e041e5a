use super::{check_dims, SparseMatrix, SparseRow};
use crate::error::Result;

/// Dense triple-loop multiplication, independent of every sparse code path.
///
/// Both operands are densified. A cell of the result is kept when at least one
/// product term with two nonzero factors reached it, so sums that cancel to
/// exactly zero are retained while untouched cells are not stored.
pub fn spgemm_reference(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    check_dims(a, b)?;
    let (m, k, p) = (a.n_rows(), a.n_cols(), b.n_cols());
    let da = a.to_dense();
    let db = b.to_dense();

    let mut rows = Vec::with_capacity(m);
    let mut sum = vec![0.0f64; p];
    let mut touched = vec![false; p];
    for (i, row_a) in da.iter().enumerate() {
        sum.iter_mut().for_each(|s| *s = 0.0);
        touched.iter_mut().for_each(|t| *t = false);
        for j in 0..k {
            let aij = row_a[j];
            if aij == 0.0 {
                continue;
            }
            for col in 0..p {
                let bjk = db[j][col];
                if bjk == 0.0 {
                    continue;
                }
                sum[col] += aij * bjk;
                touched[col] = true;
            }
        }
        let entries = (0..p)
            .filter(|&c| touched[c])
            .map(|c| (c, sum[c]))
            .collect();
        rows.push(SparseRow::from_sorted(i, entries));
    }
    SparseMatrix::new(m, p, rows)
}
