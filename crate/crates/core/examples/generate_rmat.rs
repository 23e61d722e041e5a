//! Generates Graph500, SSCA and Erdős–Rényi graphs at a small scale and
//! prints their sizes and degree-distribution slopes.
//!
//! cargo run --example generate_rmat -- 12

use oocgemm::rmat::{degree_histogram, generate, loglog_slope, Benchmark, RmatParams};

fn main() -> oocgemm::Result<()> {
    let scale: u32 = std::env::args()
        .nth(1)
        .map_or(12, |s| s.parse().expect("scale"));
    println!(
        "{:<9} {:>8} {:>9} {:>9} {:>8}",
        "preset", "nodes", "samples", "entries", "slope"
    );
    for preset in [Benchmark::Graph500, Benchmark::Ssca, Benchmark::Er] {
        let p = RmatParams::preset(preset, scale).with_seed(42);
        let m = generate(&p)?;
        let slope = loglog_slope(&degree_histogram(&m), 2);
        println!(
            "{:<9} {:>8} {:>9} {:>9} {:>8}",
            preset.name(),
            p.n_nodes(),
            p.n_samples(),
            m.n_entries(),
            slope.map_or("-".into(), |s| format!("{s:.2}"))
        );
    }
    Ok(())
}
