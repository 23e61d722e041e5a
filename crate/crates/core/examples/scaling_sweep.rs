//! A miniature benchmark sweep over scale and thread count, written as JSON
//! and plot-ready CSV next to the working files.

use oocgemm::bench::{run_suite, BenchSuite};
use oocgemm::engine::Variant;
use oocgemm::rmat::Benchmark;

fn main() -> oocgemm::Result<()> {
    let dir = tempfile::tempdir()?;
    let suite = BenchSuite {
        preset: Benchmark::Graph500,
        scales: vec![9, 10, 11],
        seed: 1,
        memories: vec![4 << 20],
        block_sizes: vec![16 << 10],
        threads: vec![1, 2, 4],
        alphas: vec![0.125],
        variants: vec![Variant::All],
        repeat: 3,
        work_dir: dir.path().to_path_buf(),
    };
    let report = run_suite(&suite, |r| {
        println!(
            "scale {:>2}  threads {}  mean {:.4}s over {:?}",
            r.cell.scale, r.cell.threads, r.mean_seconds, r.runs
        )
    })?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
