//! Runs the four strategy combinations (row- or block-based allocation, with
//! or without partial aggregation) on one input and compares time, load
//! balance and spill volume. All four produce the same bytes.

use oocgemm::engine::Variant;
use oocgemm::rmat::{generate, RmatParams};
use oocgemm::store::pack_matrix;
use oocgemm::verify::file_sha256;
use oocgemm::{multiply, EngineConfig};

fn main() -> oocgemm::Result<()> {
    let dir = tempfile::tempdir()?;
    let a = pack_matrix(
        &generate(&RmatParams::graph500(12))?,
        16 << 10,
        dir.path().join("a.blk"),
    )?;
    let mut digests = Vec::new();
    println!(
        "{:<4} {:>8} {:>10} {:>12} {:>12}",
        "var", "time(s)", "imbalance", "spill bytes", "b2 loads"
    );
    for v in Variant::ALL {
        let out = dir.path().join(format!("c-{v}.blk"));
        let cfg = EngineConfig::new(&out)
            .with_memory(4 << 20)
            .with_block_size(16 << 10)
            .with_threads(4)
            .with_variant(v);
        let (c, r) = multiply(&a, &a, &cfg)?;
        println!(
            "{:<4} {:>8.3} {:>10.2} {:>12} {:>12}",
            v.name(),
            r.phases.total,
            r.entry_imbalance(),
            r.io.spill_flush_bytes,
            r.io.b2_loads
        );
        digests.push(file_sha256(c.path())?);
    }
    assert!(digests.windows(2).all(|w| w[0] == w[1]));
    println!("all variants: sha256 {}", digests[0]);
    Ok(())
}
