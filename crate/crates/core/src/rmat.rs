//! Recursive-matrix (R-MAT) power-law graph generator.
//!
//! Each edge sample descends `scale` levels of the adjacency matrix, picking
//! one quadrant per level with probabilities `(a, b, c, d)` for top-left,
//! top-right, bottom-left and bottom-right. Repeated samples of one cell are
//! summed, so entry values are multiplicities and always add up to the sample
//! count.
//!
//! Samples are drawn in chunks of [`CHUNK_EDGES`]; chunk `k` uses ChaCha8
//! seeded with the seed on stream `k`. Output therefore depends only on the
//! parameters, never on how many threads generated it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{SparseMatrix, SparseRow};

pub const CHUNK_EDGES: u64 = 1 << 16;
pub const MAX_SCALE: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Graph500,
    Ssca,
    Er,
    Custom,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Graph500 => "graph500",
            Benchmark::Ssca => "ssca",
            Benchmark::Er => "er",
            Benchmark::Custom => "custom",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "graph500" => Ok(Benchmark::Graph500),
            "ssca" => Ok(Benchmark::Ssca),
            "er" => Ok(Benchmark::Er),
            "custom" => Ok(Benchmark::Custom),
            _ => Err(Error::Config(format!(
                "unknown preset {s:?}; expected graph500, ssca, er or custom"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RmatParams {
    pub benchmark: Benchmark,
    pub scale: u32,
    pub edge_factor: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub seed: u64,
}

impl RmatParams {
    pub fn graph500(scale: u32) -> Self {
        RmatParams {
            benchmark: Benchmark::Graph500,
            scale,
            edge_factor: 16.0,
            a: 0.57,
            b: 0.19,
            c: 0.19,
            d: 0.05,
            seed: 1,
        }
    }

    pub fn ssca(scale: u32) -> Self {
        let rest = 0.4 / 3.0;
        RmatParams {
            benchmark: Benchmark::Ssca,
            scale,
            edge_factor: 8.0,
            a: 0.6,
            b: rest,
            c: rest,
            d: 1.0 - 0.6 - 2.0 * rest,
            seed: 1,
        }
    }

    pub fn er(scale: u32) -> Self {
        RmatParams {
            benchmark: Benchmark::Er,
            scale,
            edge_factor: 16.0,
            a: 0.25,
            b: 0.25,
            c: 0.25,
            d: 0.25,
            seed: 1,
        }
    }

    pub fn preset(benchmark: Benchmark, scale: u32) -> Self {
        match benchmark {
            Benchmark::Graph500 | Benchmark::Custom => RmatParams {
                benchmark,
                ..Self::graph500(scale)
            },
            Benchmark::Ssca => Self::ssca(scale),
            Benchmark::Er => Self::er(scale),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_edge_factor(mut self, e: f64) -> Self {
        self.edge_factor = e;
        self
    }

    /// Replaces the skew; the benchmark becomes [`Benchmark::Custom`].
    pub fn with_skew(mut self, a: f64, b: f64, c: f64, d: f64) -> Self {
        self.benchmark = Benchmark::Custom;
        (self.a, self.b, self.c, self.d) = (a, b, c, d);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let skew = [self.a, self.b, self.c, self.d];
        if skew.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config(format!(
                "skew parameters must be non-negative, got {skew:?}"
            )));
        }
        let sum: f64 = skew.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "skew parameters sum to {sum}, not 1"
            )));
        }
        if self.scale > MAX_SCALE {
            return Err(Error::Config(format!(
                "scale {} exceeds {MAX_SCALE}",
                self.scale
            )));
        }
        if !(self.edge_factor.is_finite() && self.edge_factor > 0.0) {
            return Err(Error::Config(format!(
                "edge factor must be positive, got {}",
                self.edge_factor
            )));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        1usize << self.scale
    }

    /// `e × 2^n`, rounded to the nearest integer.
    pub fn n_samples(&self) -> u64 {
        (self.edge_factor * self.n_nodes() as f64).round() as u64
    }

    pub fn n_chunks(&self) -> u64 {
        self.n_samples().div_ceil(CHUNK_EDGES)
    }
}

/// Draws the samples of chunk `k` as `(row, col)` pairs.
pub fn sample_chunk(p: &RmatParams, k: u64) -> Vec<(usize, usize)> {
    let total = p.n_samples();
    let start = k * CHUNK_EDGES;
    let n = total.saturating_sub(start).min(CHUNK_EDGES) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(k);
    let ab = p.a + p.b;
    let abc = ab + p.c;
    (0..n)
        .map(|_| {
            let (mut row, mut col) = (0usize, 0usize);
            for level in (0..p.scale).rev() {
                let u: f64 = rng.random();
                let bit = 1usize << level;
                if u >= abc {
                    row |= bit;
                    col |= bit;
                } else if u >= ab {
                    row |= bit;
                } else if u >= p.a {
                    col |= bit;
                }
            }
            (row, col)
        })
        .collect()
}

/// All samples, in chunk order.
pub fn sample_edges(p: &RmatParams) -> Result<Vec<(usize, usize)>> {
    p.validate()?;
    let chunks: Vec<Vec<(usize, usize)>> = (0..p.n_chunks())
        .into_par_iter()
        .map(|k| sample_chunk(p, k))
        .collect();
    Ok(chunks.concat())
}

/// Generates the `2^n × 2^n` matrix with summed multiplicities as values.
pub fn generate(p: &RmatParams) -> Result<SparseMatrix> {
    let mut edges = sample_edges(p)?;
    edges.par_sort_unstable();
    let n = p.n_nodes();
    let mut rows: Vec<SparseRow> = Vec::with_capacity(n);
    let mut i = 0;
    for r in 0..n {
        let mut entries = Vec::new();
        while i < edges.len() && edges[i].0 == r {
            let col = edges[i].1;
            let mut count = 0u64;
            while i < edges.len() && edges[i] == (r, col) {
                count += 1;
                i += 1;
            }
            entries.push((col, count as f64));
        }
        rows.push(SparseRow::from_sorted(r, entries));
    }
    SparseMatrix::new(n, n, rows)
}

/// `(degree, node count)` for every out-degree present, ascending. Degree is
/// the number of stored entries in a row.
pub fn degree_histogram(m: &SparseMatrix) -> Vec<(usize, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for row in m.rows() {
        *counts.entry(row.len()).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}

/// Least-squares slope of `ln(count)` against `ln(degree)` over buckets with
/// degree ≥ `min_degree` (and ≥ 1). `None` with fewer than two buckets.
pub fn loglog_slope(hist: &[(usize, usize)], min_degree: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hist
        .iter()
        .filter(|&&(d, n)| d >= min_degree.max(1) && n > 0)
        .map(|&(d, n)| ((d as f64).ln(), (n as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_sizes() {
        let p = RmatParams::graph500(15);
        assert_eq!((p.n_nodes(), p.n_samples()), (32_768, 524_288));
        let p = RmatParams::ssca(21);
        assert_eq!((p.n_nodes(), p.n_samples()), (2_097_152, 16_777_216));
        for b in [Benchmark::Graph500, Benchmark::Ssca, Benchmark::Er] {
            RmatParams::preset(b, 4).validate().unwrap();
        }
    }

    #[test]
    fn bad_skew_is_rejected() {
        let p = RmatParams::graph500(4).with_skew(0.5, 0.2, 0.2, 0.2);
        assert!(matches!(generate(&p), Err(Error::Config(_))));
        let p = RmatParams::graph500(4).with_skew(1.2, -0.2, 0.0, 0.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn degenerate_skew_piles_everything_on_the_corner() {
        let p = RmatParams::graph500(6).with_skew(1.0, 0.0, 0.0, 0.0);
        let m = generate(&p).unwrap();
        assert_eq!(m.triplets().collect::<Vec<_>>(), [(0, 0, 16.0 * 64.0)]);
    }

    #[test]
    fn scale_zero_is_one_node() {
        let m = generate(&RmatParams::graph500(0)).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (1, 1));
        assert_eq!(m.get(0, 0), 16.0);
    }

    #[test]
    fn multiplicities_sum_to_sample_count() {
        let p = RmatParams::ssca(10).with_seed(42);
        let m = generate(&p).unwrap();
        let total: f64 = m.triplets().map(|t| t.2).sum();
        assert_eq!(total as u64, p.n_samples());
        assert_eq!(sample_edges(&p).unwrap().len() as u64, p.n_samples());
    }

    #[test]
    fn same_seed_same_matrix() {
        let p = RmatParams::er(9).with_seed(7);
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        assert_ne!(generate(&p).unwrap(), generate(&p.with_seed(8)).unwrap());
        // Chunks are independent of each other: chunk 1 alone matches its slice.
        let p = RmatParams::graph500(13);
        let all = sample_edges(&p).unwrap();
        assert_eq!(
            sample_chunk(&p, 1),
            all[CHUNK_EDGES as usize..2 * CHUNK_EDGES as usize]
        );
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(degree_histogram(&SparseMatrix::identity(5)), [(1, 5)]);
        assert_eq!(degree_histogram(&SparseMatrix::zeros(3, 3)), [(0, 3)]);
    }

    #[test]
    fn graph500_degrees_follow_a_power_law() {
        let m = generate(&RmatParams::graph500(16)).unwrap();
        let hist = degree_histogram(&m);
        let slope = loglog_slope(&hist, 1).unwrap();
        assert!(slope < -0.5, "slope {slope}");

        let mut degrees: Vec<usize> = m.rows().iter().map(|r| r.len()).collect();
        let hub = degrees[0];
        degrees.sort_unstable();
        assert!(hub > degrees[degrees.len() / 2]);
    }
}
