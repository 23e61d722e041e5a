//! Packs a matrix into fixed-size blocks, then reads rows back through the
//! object index table.

use oocgemm::store::pack_matrix;
use oocgemm::SparseMatrix;

fn main() -> oocgemm::Result<()> {
    let dir = tempfile::tempdir()?;
    // A 6×6 band with one dense row, so some row needs several fragments.
    let mut t = Vec::new();
    for i in 0..6 {
        t.push((i, i, 1.0 + i as f64));
        if i + 1 < 6 {
            t.push((i, i + 1, -1.0));
        }
    }
    t.extend((0..6).map(|j| (3, j, 0.5)));
    let m = SparseMatrix::from_triplets(6, 6, t)?;

    let stored = pack_matrix(&m, 128, dir.path().join("band.blk"))?;
    println!(
        "{} rows, {} entries in {} blocks of {} bytes",
        stored.n_rows(),
        stored.n_entries(),
        stored.block_count(),
        stored.block_size()
    );
    for (k, (first, last)) in stored.table().ranges().iter().enumerate() {
        println!("block {k}: rows {first}..={last}");
    }
    let row = stored.read_row(3)?;
    println!("row 3 -> {:?}", row.entries());
    assert_eq!(stored.to_sparse()?, m);
    Ok(())
}
