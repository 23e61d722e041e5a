use std::collections::HashMap;
use std::io::BufRead;

use super::IngestOptions;
use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;

/// Streams `src dst [weight]` lines into `sink` and returns the square
/// dimension: the largest id plus one, or the number of distinct ids when
/// compacting. Blank lines and lines starting with `#` or `%` are skipped.
pub fn read_edge_list<R: BufRead>(
    reader: R,
    opts: &IngestOptions,
    sink: &mut dyn FnMut(usize, usize, f64),
) -> Result<(usize, usize)> {
    let base = usize::from(opts.one_indexed.unwrap_or(false));
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut n = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let no = k + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let mut f = t.split_whitespace();
        let mut id = |what: &str| -> Result<usize> {
            let s = f
                .next()
                .ok_or_else(|| Error::format_at(no, format!("missing {what} id")))?;
            let raw: usize = s.parse().map_err(|_| {
                Error::format_at(no, format!("{what} id {s:?} is not a non-negative integer"))
            })?;
            let i = raw
                .checked_sub(base)
                .ok_or_else(|| Error::format_at(no, format!("{what} id 0 in a one-based list")))?;
            Ok(i)
        };
        let (mut src, mut dst) = (id("source")?, id("target")?);
        let weight = match f.next() {
            Some(s) => {
                let w: f64 = s
                    .parse()
                    .map_err(|_| Error::format_at(no, format!("weight {s:?} is not a number")))?;
                if !w.is_finite() {
                    return Err(Error::format_at(no, format!("weight {s:?} is not finite")));
                }
                w
            }
            None => opts.value_default,
        };
        if opts.compact_ids {
            for v in [&mut src, &mut dst] {
                let next = ids.len();
                *v = *ids.entry(*v).or_insert(next);
            }
            n = ids.len();
        } else {
            n = n.max(src.max(dst) + 1);
        }
        if opts.transpose {
            std::mem::swap(&mut src, &mut dst);
        }
        sink(src, dst, weight);
        if opts.symmetrize && src != dst {
            sink(dst, src, weight);
        }
    }
    Ok((n, n))
}

/// Parses an edge list into a square matrix, summing repeated edges.
pub fn parse_edge_list<R: BufRead>(reader: R, opts: &IngestOptions) -> Result<SparseMatrix> {
    let mut triplets = Vec::new();
    let (r, c) = read_edge_list(reader, opts, &mut |i, j, v| triplets.push((i, j, v)))?;
    let m = SparseMatrix::from_triplets(r, c, triplets)?;
    Ok(if opts.drop_explicit_zeros {
        m.without_zeros()
    } else {
        m
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SparseMatrix> {
        parse_edge_list(text.as_bytes(), &IngestOptions::edge_list())
    }

    #[test]
    fn two_directed_edges() {
        let m = parse("0 1\n1 0\n").unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (2, 2));
        assert_eq!(m.triplets().collect::<Vec<_>>(), [(0, 1, 1.0), (1, 0, 1.0)]);
    }

    #[test]
    fn repeated_edges_sum() {
        let m = parse("0 1\n0 1\n").unwrap();
        assert_eq!(m.triplets().collect::<Vec<_>>(), [(0, 1, 2.0)]);
    }

    #[test]
    fn comments_only_is_empty() {
        let m = parse("# Directed graph\n# Nodes: 0 Edges: 0\n\n").unwrap();
        assert_eq!((m.n_rows(), m.n_cols(), m.n_entries()), (0, 0, 0));
    }

    #[test]
    fn weights_compaction_and_symmetry() {
        let opts = IngestOptions {
            compact_ids: true,
            symmetrize: true,
            ..IngestOptions::edge_list()
        };
        let m = parse_edge_list("100\t7 2.5\n7 7\n".as_bytes(), &opts).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(
            m.triplets().collect::<Vec<_>>(),
            [(0, 1, 2.5), (1, 0, 2.5), (1, 1, 1.0)]
        );
    }

    #[test]
    fn bad_ids_report_their_line() {
        for (text, line) in [
            ("0 1\n# x\n1 b\n", 3),
            ("-1 2\n", 1),
            ("3\n", 1),
            ("0 1 w\n", 1),
        ] {
            match parse(text) {
                Err(Error::Format { line: Some(l), .. }) => assert_eq!(l, line),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
