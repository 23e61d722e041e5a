//! Squares a Graph500 R-MAT matrix from disk under a tight memory budget and
//! prints the buffer plan, I/O counters and per-worker work.
//!
//! cargo run --release --example multiply_out_of_core -- 13 8MiB

use oocgemm::rmat::{generate, RmatParams};
use oocgemm::size::{format_bytes, parse_bytes};
use oocgemm::store::pack_matrix;
use oocgemm::{multiply, EngineConfig};

fn main() -> oocgemm::Result<()> {
    let mut args = std::env::args().skip(1);
    let scale: u32 = args.next().map_or(12, |s| s.parse().expect("scale"));
    let memory = parse_bytes(&args.next().unwrap_or_else(|| "8MiB".into()))?;
    let dir = tempfile::tempdir()?;

    let m = generate(&RmatParams::graph500(scale))?;
    let a = pack_matrix(&m, 64 << 10, dir.path().join("a.blk"))?;
    let cfg = EngineConfig::new(dir.path().join("c.blk"))
        .with_memory(memory)
        .with_block_size(64 << 10)
        .with_threads(4);
    let (c, r) = multiply(&a, &a, &cfg)?;

    println!(
        "A: {} rows, {} entries, {} blocks",
        a.n_rows(),
        a.n_entries(),
        a.block_count()
    );
    println!(
        "plan: B1 {}  B2 {} ({} blocks)  Bout {}",
        format_bytes(r.plan.b1_bytes),
        format_bytes(r.plan.b2_bytes),
        r.b2_capacity_blocks,
        format_bytes(r.plan.bout_bytes)
    );
    println!(
        "io: B2 loads {}  hits {}  spill {} written in {} runs",
        r.io.b2_loads,
        r.io.b2_hits,
        format_bytes(r.io.spill_flush_bytes),
        r.io.spill_runs
    );
    for t in &r.threads {
        println!(
            "worker {}: {} blocks, {} products",
            t.worker, t.assigned_blocks, t.products
        );
    }
    println!("C: {} entries in {:.3}s", c.n_entries(), r.phases.total);
    Ok(())
}
