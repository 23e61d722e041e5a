//! Spill runs: batches of staged segments flushed from an output share.
//!
//! A spill file holds one worker's runs back to back. Each run is a header
//!
//! | bytes  | field                                   |
//! |--------|-----------------------------------------|
//! | 0..4   | magic `OCSR`                            |
//! | 4..12  | first row id (u64)                      |
//! | 12..20 | last row id (u64)                       |
//! | 20..24 | segment count (u32)                     |
//! | 24..32 | entry count (u64)                       |
//! | 32..40 | body bytes (u64)                        |
//! | 40..44 | CRC-32 of header bytes 0..40 and body   |
//!
//! followed by segments `(row u64, entry_count u32, entries)`, entries being
//! `(col u64, value f64)` little-endian. Row ids never decrease within a file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::buffer::{bump, IoStats, Segment};
use crate::error::{Error, Result};
use crate::store::format::{encode_entries, u32_at, u64_at, EntryBytes};

const MAGIC: &[u8; 4] = b"OCSR";
pub const RUN_HEADER_BYTES: usize = 44;
const SEGMENT_HEADER_BYTES: usize = 12;

pub struct SpillWriter {
    path: PathBuf,
    out: BufWriter<File>,
    body: Vec<u8>,
    runs: u64,
    bytes: u64,
    last_row: Option<usize>,
}

impl SpillWriter {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = File::create(&path).map_err(|e| Error::storage(&path, e, 0))?;
        Ok(SpillWriter {
            path,
            out: BufWriter::with_capacity(64 << 10, file),
            body: Vec::new(),
            runs: 0,
            bytes: 0,
            last_row: None,
        })
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    /// Appends one run. `segments` must be non-empty with non-decreasing
    /// rows, none below the previous run's last row.
    pub fn write_run(&mut self, segments: &[Segment], stats: &IoStats) -> Result<()> {
        let (first, last) = match (segments.first(), segments.last()) {
            (Some(f), Some(l)) => (f.row_id, l.row_id),
            _ => return Ok(()),
        };
        if self.last_row.is_some_and(|prev| first < prev)
            || segments.windows(2).any(|w| w[1].row_id < w[0].row_id)
        {
            return Err(Error::InvalidInput("spill run rows out of order".into()));
        }
        self.body.clear();
        let mut entries = 0u64;
        for s in segments {
            self.body
                .extend_from_slice(&(s.row_id as u64).to_le_bytes());
            self.body
                .extend_from_slice(&(s.entries.len() as u32).to_le_bytes());
            encode_entries(&mut self.body, &s.entries);
            entries += s.entries.len() as u64;
        }
        let mut header = [0u8; RUN_HEADER_BYTES];
        header[0..4].copy_from_slice(MAGIC);
        header[4..12].copy_from_slice(&(first as u64).to_le_bytes());
        header[12..20].copy_from_slice(&(last as u64).to_le_bytes());
        header[20..24].copy_from_slice(&(segments.len() as u32).to_le_bytes());
        header[24..32].copy_from_slice(&entries.to_le_bytes());
        header[32..40].copy_from_slice(&(self.body.len() as u64).to_le_bytes());
        let crc = checksum(&header[..40], &self.body);
        header[40..44].copy_from_slice(&crc.to_le_bytes());

        let size = (RUN_HEADER_BYTES + self.body.len()) as u64;
        self.out
            .write_all(&header)
            .and_then(|()| self.out.write_all(&self.body))
            .map_err(|e| Error::storage(&self.path, e, size))?;
        self.runs += 1;
        self.bytes += size;
        self.last_row = Some(last);
        bump(&stats.spill_runs, 1);
        bump(&stats.spill_flush_bytes, size);
        Ok(())
    }

    pub fn finish(mut self) -> Result<SpillFile> {
        let bytes = self.bytes;
        self.out
            .flush()
            .map_err(|e| Error::storage(&self.path, e, bytes))?;
        self.body = Vec::new();
        Ok(SpillFile {
            path: self.path,
            runs: self.runs,
            bytes: self.bytes,
        })
    }
}

fn checksum(header: &[u8], body: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(header);
    h.update(body);
    h.finalize()
}

/// A finished spill file.
#[derive(Debug, Clone)]
pub struct SpillFile {
    pub path: PathBuf,
    pub runs: u64,
    pub bytes: u64,
}

/// Reads a spill file back one run at a time.
pub struct RunReader<'s> {
    path: PathBuf,
    input: BufReader<File>,
    stats: &'s IoStats,
    runs_left: u64,
    last_row: Option<usize>,
}

impl<'s> RunReader<'s> {
    pub fn open(file: &SpillFile, stats: &'s IoStats) -> Result<Self> {
        let input = File::open(&file.path).map_err(|e| Error::storage(&file.path, e, 0))?;
        Ok(RunReader {
            path: file.path.clone(),
            input: BufReader::with_capacity(64 << 10, input),
            stats,
            runs_left: file.runs,
            last_row: None,
        })
    }

    fn corrupt(&self, what: &str) -> Error {
        Error::format(format!(
            "{}: corrupt spill run: {what}",
            self.path.display()
        ))
    }

    /// Next run's segments, or `None` after the last run.
    pub fn next_run(&mut self) -> Result<Option<Vec<Segment>>> {
        if self.runs_left == 0 {
            return Ok(None);
        }
        let mut header = [0u8; RUN_HEADER_BYTES];
        self.input
            .read_exact(&mut header)
            .map_err(|e| read_error(&self.path, e))?;
        if &header[0..4] != MAGIC {
            return Err(self.corrupt("bad magic"));
        }
        let first = u64_at(&header, 4) as usize;
        let last = u64_at(&header, 12) as usize;
        let segment_count = u32_at(&header, 20) as usize;
        let entry_count = u64_at(&header, 24) as usize;
        let body_bytes = u64_at(&header, 32) as usize;
        let expected = segment_count
            .checked_mul(SEGMENT_HEADER_BYTES)
            .and_then(|s| entry_count.checked_mul(16).and_then(|e| e.checked_add(s)));
        if expected != Some(body_bytes) {
            return Err(self.corrupt("size fields disagree"));
        }
        let mut body = vec![0u8; body_bytes];
        self.input
            .read_exact(&mut body)
            .map_err(|e| read_error(&self.path, e))?;
        if checksum(&header[..40], &body) != u32_at(&header, 40) {
            return Err(self.corrupt("checksum mismatch"));
        }
        bump(
            &self.stats.spill_read_bytes,
            (RUN_HEADER_BYTES + body_bytes) as u64,
        );

        let mut segments = Vec::with_capacity(segment_count);
        let mut at = 0;
        let mut prev = self.last_row.unwrap_or(0);
        for _ in 0..segment_count {
            if at + SEGMENT_HEADER_BYTES > body.len() {
                return Err(self.corrupt("segment past end of body"));
            }
            let row = u64_at(&body, at) as usize;
            let n = u32_at(&body, at + 8) as usize;
            at += SEGMENT_HEADER_BYTES;
            let end = at + n * 16;
            if end > body.len() {
                return Err(self.corrupt("segment past end of body"));
            }
            if row < prev || row < first || row > last {
                return Err(self.corrupt("segment rows out of order"));
            }
            prev = row;
            segments.push(Segment {
                row_id: row,
                entries: EntryBytes::new(&body[at..end]).to_vec(),
            });
            at = end;
        }
        if segments.first().map(|s| s.row_id) != Some(first) || prev != last {
            return Err(self.corrupt("row span disagrees with segments"));
        }
        self.runs_left -= 1;
        self.last_row = Some(last);
        Ok(Some(segments))
    }
}

fn read_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::format(format!("{}: spill file truncated", path.display()))
    } else {
        Error::storage(path, e, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(row: usize, entries: &[(usize, f64)]) -> Segment {
        Segment {
            row_id: row,
            entries: entries.to_vec(),
        }
    }

    #[test]
    fn runs_round_trip_and_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        let stats = IoStats::new();
        let mut w = SpillWriter::create(dir.path().join("w0.runs")).unwrap();
        let r0 = vec![seg(0, &[(1, 1.0)]), seg(0, &[(1, 2.0)]), seg(3, &[])];
        let r1 = vec![seg(3, &[(0, -1.5), (9, 4.0)])];
        w.write_run(&r0, &stats).unwrap();
        w.write_run(&r1, &stats).unwrap();
        w.write_run(&[], &stats).unwrap();
        assert!(w.write_run(&[seg(2, &[])], &stats).is_err());
        let file = w.finish().unwrap();
        assert_eq!(file.runs, 2);
        let body0 = 3 * 12 + 2 * 16;
        let body1 = 12 + 2 * 16;
        assert_eq!(file.bytes, (2 * RUN_HEADER_BYTES + body0 + body1) as u64);
        assert_eq!(std::fs::metadata(&file.path).unwrap().len(), file.bytes);

        let mut r = RunReader::open(&file, &stats).unwrap();
        assert_eq!(r.next_run().unwrap().unwrap(), r0);
        assert_eq!(r.next_run().unwrap().unwrap(), r1);
        assert!(r.next_run().unwrap().is_none());
        let s = stats.snapshot();
        assert_eq!(
            (s.spill_runs, s.spill_flush_bytes, s.spill_read_bytes),
            (2, file.bytes, file.bytes)
        );
    }

    #[test]
    fn corruption_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let stats = IoStats::new();
        let mut w = SpillWriter::create(dir.path().join("w0.runs")).unwrap();
        w.write_run(&[seg(5, &[(2, 2.0)])], &stats).unwrap();
        let file = w.finish().unwrap();
        let mut bytes = std::fs::read(&file.path).unwrap();
        bytes[RUN_HEADER_BYTES + 14] ^= 0x40;
        std::fs::write(&file.path, &bytes).unwrap();
        let mut r = RunReader::open(&file, &stats).unwrap();
        assert!(matches!(r.next_run(), Err(Error::Format { .. })));

        std::fs::write(&file.path, &bytes[..30]).unwrap();
        let mut r = RunReader::open(&file, &stats).unwrap();
        assert!(matches!(r.next_run(), Err(Error::Format { .. })));
    }
}
