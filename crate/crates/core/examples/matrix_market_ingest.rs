//! Ingests a symmetric Matrix Market file and a directed edge list, then
//! exports a block file back to Matrix Market text.

use oocgemm::io::{export_coordinate, ingest_reader, IngestOptions, InputFormat};

const MTX: &str = "%%MatrixMarket matrix coordinate real symmetric
% lower triangle of a 4x4 Laplacian
4 4 7
1 1 2
2 1 -1
2 2 2
3 2 -1
3 3 2
4 3 -1
4 4 2
";

const EDGES: &str = "# FromNodeId\tToNodeId
0\t1
1\t2
2\t0
2\t0
";

fn main() -> oocgemm::Result<()> {
    let dir = tempfile::tempdir()?;
    let l = ingest_reader(
        MTX.as_bytes(),
        InputFormat::MatrixMarket,
        &IngestOptions::default(),
        256,
        &dir.path().join("laplacian.blk"),
        1 << 16,
    )?;
    println!(
        "laplacian: {}×{} with {} entries (mirrored)",
        l.n_rows(),
        l.n_cols(),
        l.n_entries()
    );

    let g = ingest_reader(
        EDGES.as_bytes(),
        InputFormat::EdgeList,
        &IngestOptions::edge_list(),
        256,
        &dir.path().join("cycle.blk"),
        1 << 16,
    )?;
    println!(
        "cycle: {} nodes, {} edges (2→0 twice, summed)",
        g.n_rows(),
        g.n_entries()
    );

    let mut text = Vec::new();
    export_coordinate(&g.to_sparse()?, &mut text)?;
    print!("{}", String::from_utf8_lossy(&text));
    Ok(())
}
