//! Random fixtures shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use oocgemm::SparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `rows × cols` with each cell nonzero with probability `density`; values
/// are integers in [-4, 4] excluding 0.
pub fn random_int_matrix(rows: usize, cols: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if rng.random_bool(density) {
                let mut v = rng.random_range(-4i32..=4);
                if v == 0 {
                    v = 1;
                }
                t.push((i, j, v as f64));
            }
        }
    }
    SparseMatrix::from_triplets(rows, cols, t).expect("in range")
}

/// Matrices shaped to exercise the block store: empty matrices, empty rows,
/// and (for `case % 7 == 0`) one dense row long enough to need at least
/// three 256-byte blocks.
pub fn roundtrip_corpus_member(case: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ case);
    match case % 10 {
        0 => SparseMatrix::zeros(0, 0),
        1 => SparseMatrix::zeros(rng.random_range(1..20), rng.random_range(1..20)),
        _ => {
            let rows = rng.random_range(1..40);
            let cols = rng.random_range(1..80);
            let mut t = Vec::new();
            for i in 0..rows {
                if rng.random_bool(0.3) {
                    continue; // empty row
                }
                for j in 0..cols {
                    if rng.random_bool(0.15) {
                        let v: f64 = rng.random_range(-1000.0..1000.0);
                        t.push((i, j, if v == 0.0 { 1.0 } else { v }));
                    }
                }
            }
            if case.is_multiple_of(7) {
                let r = rng.random_range(0..rows);
                let cols = cols.max(60);
                t.retain(|&(i, _, _)| i != r);
                t.extend((0..cols).map(|j| (r, j, (j + 1) as f64)));
                return SparseMatrix::from_triplets(rows, cols, t).expect("in range");
            }
            SparseMatrix::from_triplets(rows, cols, t).expect("in range")
        }
    }
}
