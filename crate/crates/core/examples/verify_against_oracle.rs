//! Multiplies two different random matrices out of core and checks the
//! result three ways: the dense oracle, sampled row recomputation, and the
//! streaming row/column-sum check.

use oocgemm::rmat::{generate, RmatParams};
use oocgemm::store::pack_matrix;
use oocgemm::verify::{column_sum_checksum, sample_rows, verify_rows, verify_with_oracle};
use oocgemm::{multiply, EngineConfig};

fn main() -> oocgemm::Result<()> {
    let dir = tempfile::tempdir()?;
    let a = pack_matrix(
        &generate(&RmatParams::graph500(9).with_seed(1))?,
        4096,
        dir.path().join("a.blk"),
    )?;
    let b = pack_matrix(
        &generate(&RmatParams::er(9).with_seed(2))?,
        4096,
        dir.path().join("b.blk"),
    )?;
    let cfg = EngineConfig::new(dir.path().join("c.blk"))
        .with_memory(1 << 20)
        .with_block_size(4096)
        .with_threads(2);
    let (c, _) = multiply(&a, &b, &cfg)?;

    let oracle = verify_with_oracle(&a, &b, &c, 1_000_000, 1e-9)?;
    println!(
        "oracle: {} rows, passed {}",
        oracle.rows_compared,
        oracle.passed()
    );
    let rows = sample_rows(c.n_rows(), 20, 7);
    let sampled = verify_rows(&a, &b, &c, &rows, 1e-9)?;
    println!("sampled rows {:?}: passed {}", &rows[..5], sampled.passed());
    let sums = column_sum_checksum(&a, &b, &c, 1e-12)?;
    println!(
        "row/column sums: max |diff| {:e}, passed {}",
        sums.max_abs_diff,
        sums.passed()
    );
    Ok(())
}
