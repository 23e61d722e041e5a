//! Shows how a memory capacity is split into the former-matrix buffer, the
//! latter-matrix cache and the output buffer, and what happens when it is
//! too small.

use oocgemm::buffer::{minimum_capacity, plan_buffers};
use oocgemm::size::format_bytes;

const MIB: u64 = 1 << 20;

fn main() {
    let (b, t, alpha) = (MIB, 4, 0.125);
    let max_row = 8 * MIB;
    println!(
        "block {}  threads {t}  alpha {alpha}  max row {}",
        format_bytes(b),
        format_bytes(max_row)
    );
    for cap in [16 * MIB, 64 * MIB, 256 * MIB] {
        let p = plan_buffers(cap, b, t, alpha, max_row).expect("feasible");
        println!(
            "C {:>9}: B1 {:>9}  B2 {:>9}  Bout {:>9}  per worker {:>9}",
            format_bytes(cap),
            format_bytes(p.b1_bytes),
            format_bytes(p.b2_bytes),
            format_bytes(p.bout_bytes),
            format_bytes(p.output_share_bytes())
        );
    }
    println!(
        "minimum C: {}",
        format_bytes(minimum_capacity(b, t, alpha, max_row))
    );
    match plan_buffers(5 * MIB, b, t, alpha, max_row) {
        Ok(_) => unreachable!(),
        Err(e) => println!("5 MiB: {e}"),
    }
}
