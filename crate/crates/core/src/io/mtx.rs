use std::io::{BufRead, Write};

use super::IngestOptions;
use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MtxHeader {
    pub field: Field,
    pub symmetry: Symmetry,
}

impl MtxHeader {
    fn parse(line: &str) -> Result<Self> {
        let bad = |m: String| Error::format_at(1, m);
        let words: Vec<String> = line
            .split_whitespace()
            .map(str::to_ascii_lowercase)
            .collect();
        if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
            return Err(bad(format!(
                "expected a %%MatrixMarket matrix header, got {line:?}"
            )));
        }
        if words[2] != "coordinate" {
            return Err(bad(format!(
                "only coordinate bodies are supported, got {:?}",
                words[2]
            )));
        }
        let field = match words[3].as_str() {
            "real" | "double" => Field::Real,
            "integer" => Field::Integer,
            "pattern" => Field::Pattern,
            other => return Err(bad(format!("unsupported field {other:?}"))),
        };
        let symmetry = match words[4].as_str() {
            "general" => Symmetry::General,
            "symmetric" => Symmetry::Symmetric,
            "skew-symmetric" => Symmetry::SkewSymmetric,
            other => return Err(bad(format!("unsupported symmetry {other:?}"))),
        };
        Ok(MtxHeader { field, symmetry })
    }
}

/// Streams the entries of a Matrix Market coordinate file into `sink`, in
/// file order, and returns the (possibly transposed) dimensions. Nothing is
/// summed or dropped here.
pub fn read_matrix_market<R: BufRead>(
    reader: R,
    opts: &IngestOptions,
    sink: &mut dyn FnMut(usize, usize, f64),
) -> Result<(usize, usize)> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let header = match lines.next() {
        Some((_, line)) => MtxHeader::parse(&line?)?,
        None => return Err(Error::format_at(1, "empty input")),
    };
    let base = usize::from(opts.one_indexed.unwrap_or(true));

    let mut dims = None;
    let mut declared = 0usize;
    let mut seen = 0usize;
    for (no, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut f = t.split_whitespace();
        let Some((n_rows, n_cols)) = dims else {
            let mut next = || -> Result<usize> {
                f.next()
                    .ok_or_else(|| {
                        Error::format_at(no, "size line needs rows, columns and entries")
                    })?
                    .parse()
                    .map_err(|_| Error::format_at(no, format!("bad size line {t:?}")))
            };
            let (r, c, n) = (next()?, next()?, next()?);
            dims = Some((r, c));
            declared = n;
            continue;
        };
        if seen == declared {
            return Err(Error::format_at(
                no,
                format!("more than the declared {declared} entries"),
            ));
        }
        let mut index = |what: &str, bound: usize| -> Result<usize> {
            let s = f
                .next()
                .ok_or_else(|| Error::format_at(no, format!("missing {what} index")))?;
            let i: usize = s.parse().map_err(|_| {
                Error::format_at(no, format!("{what} index {s:?} is not an integer"))
            })?;
            if i < base || i - base >= bound {
                return Err(Error::format_at(
                    no,
                    format!("{what} index {i} outside 1..={bound}"),
                ));
            }
            Ok(i - base)
        };
        let i = index("row", n_rows)?;
        let j = index("column", n_cols)?;
        let v = match header.field {
            Field::Pattern => opts.value_default,
            Field::Real | Field::Integer => {
                let s = f
                    .next()
                    .ok_or_else(|| Error::format_at(no, "missing value"))?;
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::format_at(no, format!("value {s:?} is not a number")))?;
                if !v.is_finite() {
                    return Err(Error::format_at(no, format!("value {s:?} is not finite")));
                }
                v
            }
        };
        seen += 1;
        let mut emit = |r: usize, c: usize, v: f64| {
            if opts.transpose {
                sink(c, r, v)
            } else {
                sink(r, c, v)
            }
        };
        emit(i, j, v);
        if opts.symmetrize && i != j {
            match header.symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => emit(j, i, v),
                Symmetry::SkewSymmetric => emit(j, i, -v),
            }
        }
    }
    let Some((r, c)) = dims else {
        return Err(Error::format("missing size line"));
    };
    if seen < declared {
        return Err(Error::format(format!(
            "declared {declared} entries, found {seen}"
        )));
    }
    Ok(if opts.transpose { (c, r) } else { (r, c) })
}

/// Parses a Matrix Market coordinate file. Duplicates are summed in file
/// order; zero sums are dropped when `opts.drop_explicit_zeros` is set.
pub fn parse_matrix_market<R: BufRead>(reader: R, opts: &IngestOptions) -> Result<SparseMatrix> {
    let mut triplets = Vec::new();
    let (r, c) = read_matrix_market(reader, opts, &mut |i, j, v| triplets.push((i, j, v)))?;
    let m = SparseMatrix::from_triplets(r, c, triplets)?;
    Ok(if opts.drop_explicit_zeros {
        m.without_zeros()
    } else {
        m
    })
}

/// Writes `m` as a `coordinate real general` file, one-based, entries in
/// (row, column) order. Values use the shortest text that reads back to the
/// same `f64`.
pub fn export_coordinate<W: Write>(m: &SparseMatrix, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.n_entries())?;
    for (i, j, v) in m.triplets() {
        writeln!(out, "{} {} {v:?}", i + 1, j + 1)?;
    }
    out.flush()?;
    Ok(())
}
