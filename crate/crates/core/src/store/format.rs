//! Byte layout of a block file.
//!
//! A block file is a sequence of `block_size`-byte blocks. Every block starts
//! with a 24-byte little-endian header:
//!
//! | offset | size | field                                              |
//! |-------:|-----:|----------------------------------------------------|
//! | 0      | 4    | magic `OCBK`                                       |
//! | 4      | 8    | block index (u64)                                  |
//! | 12     | 4    | object count (u32)                                 |
//! | 16     | 4    | payload bytes (u32)                                |
//! | 20     | 4    | CRC-32 (IEEE) of header bytes `0..20` then payload |
//!
//! The payload is a run of objects, each one row or one fragment of a row:
//!
//! | size | field                 |
//! |-----:|-----------------------|
//! | 8    | row id (u64)          |
//! | 4    | fragment index (u32)  |
//! | 4    | fragment count (u32)  |
//! | 4    | entry count (u32)     |
//! | 16×n | `(col: u64, value: f64)` entries |
//!
//! Bytes after the payload are zero padding up to `block_size`.

use crate::error::{Error, Result};
use crate::matrix::{Entry, EntrySource};

pub const BLOCK_MAGIC: [u8; 4] = *b"OCBK";
pub const BLOCK_HEADER_BYTES: usize = 24;
pub const OBJECT_HEADER_BYTES: usize = 20;
pub const ENTRY_BYTES: usize = 16;
/// Smallest block able to hold one object with one entry.
pub const MIN_BLOCK_SIZE: usize = BLOCK_HEADER_BYTES + OBJECT_HEADER_BYTES + ENTRY_BYTES;
pub const MAX_BLOCK_SIZE: usize = BLOCK_HEADER_BYTES + u32::MAX as usize;
pub const DEFAULT_BLOCK_SIZE: usize = 1 << 20;

pub fn check_block_size(block_size: usize) -> Result<()> {
    if block_size < MIN_BLOCK_SIZE {
        return Err(Error::Config(format!(
            "block size {block_size} is below the minimum of {MIN_BLOCK_SIZE} bytes"
        )));
    }
    if block_size > MAX_BLOCK_SIZE {
        return Err(Error::Config(format!(
            "block size {block_size} exceeds the maximum of {MAX_BLOCK_SIZE} bytes"
        )));
    }
    Ok(())
}

/// Serialized size of an object holding `entries` entries.
#[inline]
pub const fn object_bytes(entries: usize) -> usize {
    OBJECT_HEADER_BYTES + entries * ENTRY_BYTES
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockHeader {
    pub block_index: u64,
    pub object_count: u32,
    pub payload_bytes: u32,
    pub checksum: u32,
}

impl BlockHeader {
    fn leading_bytes(&self) -> [u8; 20] {
        let mut b = [0u8; 20];
        b[0..4].copy_from_slice(&BLOCK_MAGIC);
        b[4..12].copy_from_slice(&self.block_index.to_le_bytes());
        b[12..16].copy_from_slice(&self.object_count.to_le_bytes());
        b[16..20].copy_from_slice(&self.payload_bytes.to_le_bytes());
        b
    }

    pub fn compute_checksum(&self, payload: &[u8]) -> u32 {
        let mut h = crc32fast::Hasher::new();
        h.update(&self.leading_bytes());
        h.update(payload);
        h.finalize()
    }

    pub fn encode(&self) -> [u8; BLOCK_HEADER_BYTES] {
        let mut b = [0u8; BLOCK_HEADER_BYTES];
        b[..20].copy_from_slice(&self.leading_bytes());
        b[20..24].copy_from_slice(&self.checksum.to_le_bytes());
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < BLOCK_HEADER_BYTES {
            return Err(Error::format("truncated block header"));
        }
        if bytes[0..4] != BLOCK_MAGIC {
            return Err(Error::format("bad block magic"));
        }
        Ok(BlockHeader {
            block_index: u64_at(bytes, 4),
            object_count: u32_at(bytes, 12),
            payload_bytes: u32_at(bytes, 16),
            checksum: u32_at(bytes, 20),
        })
    }
}

#[inline]
pub(crate) fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

#[inline]
pub(crate) fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Appends `(col, value)` pairs in their on-disk encoding.
pub fn encode_entries(out: &mut Vec<u8>, entries: &[Entry]) {
    out.reserve(entries.len() * ENTRY_BYTES);
    for &(c, v) in entries {
        out.extend_from_slice(&(c as u64).to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_object_header(
    out: &mut Vec<u8>,
    row_id: usize,
    fragment_index: u32,
    fragment_count: u32,
    entry_count: usize,
) {
    out.extend_from_slice(&(row_id as u64).to_le_bytes());
    out.extend_from_slice(&fragment_index.to_le_bytes());
    out.extend_from_slice(&fragment_count.to_le_bytes());
    out.extend_from_slice(&(entry_count as u32).to_le_bytes());
}

/// Encoded entries viewed in place, without decoding into a vector.
#[derive(Debug, Clone, Copy)]
pub struct EntryBytes<'a>(&'a [u8]);

impl<'a> EntryBytes<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        debug_assert_eq!(bytes.len() % ENTRY_BYTES, 0);
        EntryBytes(bytes)
    }

    pub fn len(&self) -> usize {
        self.0.len() / ENTRY_BYTES
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_bytes(&self) -> &'a [u8] {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Entry> + 'a {
        self.0.chunks_exact(ENTRY_BYTES).map(decode_entry)
    }

    pub fn to_vec(&self) -> Vec<Entry> {
        self.iter().collect()
    }
}

#[inline]
fn decode_entry(chunk: &[u8]) -> Entry {
    (u64_at(chunk, 0) as usize, f64::from_bits(u64_at(chunk, 8)))
}

impl EntrySource for EntryBytes<'_> {
    #[inline]
    fn entry_count(&self) -> usize {
        self.len()
    }

    #[inline]
    fn entry(&self, i: usize) -> Entry {
        decode_entry(&self.0[i * ENTRY_BYTES..(i + 1) * ENTRY_BYTES])
    }

    #[inline]
    fn visit_from(&self, start: usize, mut f: impl FnMut(Entry) -> bool) -> usize {
        let (chunks, _) = self.0[start * ENTRY_BYTES..].as_chunks::<ENTRY_BYTES>();
        for (k, chunk) in chunks.iter().enumerate() {
            let (col, value) = chunk.split_at(8);
            let col = u64::from_le_bytes(col.try_into().unwrap()) as usize;
            let value = f64::from_bits(u64::from_le_bytes(value.try_into().unwrap()));
            if !f((col, value)) {
                return start + k;
            }
        }
        self.len()
    }
}

/// Location of one object inside a decoded block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectMeta {
    pub row_id: usize,
    pub fragment_index: u32,
    pub fragment_count: u32,
    /// Byte offset of the first entry within the payload.
    offset: usize,
    pub entry_count: usize,
}

impl ObjectMeta {
    pub fn is_last_fragment(&self) -> bool {
        self.fragment_index + 1 == self.fragment_count
    }
}

/// A verified block: its payload bytes plus an index of the objects in it.
#[derive(Debug)]
pub struct Block {
    index: usize,
    payload: Vec<u8>,
    objects: Vec<ObjectMeta>,
}

impl Block {
    /// Decodes and verifies one raw block read from position `expected_index`.
    pub fn decode(mut raw: Vec<u8>, expected_index: usize) -> Result<Block> {
        let header = BlockHeader::decode(&raw)?;
        let fail = |m: String| Error::format(format!("block {expected_index}: {m}"));
        if header.block_index != expected_index as u64 {
            return Err(fail(format!("header carries index {}", header.block_index)));
        }
        let payload_len = header.payload_bytes as usize;
        if BLOCK_HEADER_BYTES + payload_len > raw.len() {
            return Err(fail(format!(
                "payload of {payload_len} bytes overruns the block"
            )));
        }
        raw.truncate(BLOCK_HEADER_BYTES + payload_len);
        let payload = raw.split_off(BLOCK_HEADER_BYTES);
        if header.compute_checksum(&payload) != header.checksum {
            return Err(fail("checksum mismatch".into()));
        }

        let mut objects = Vec::with_capacity(header.object_count as usize);
        let mut at = 0usize;
        for _ in 0..header.object_count {
            if at + OBJECT_HEADER_BYTES > payload.len() {
                return Err(fail("truncated object header".into()));
            }
            let meta = ObjectMeta {
                row_id: u64_at(&payload, at) as usize,
                fragment_index: u32_at(&payload, at + 8),
                fragment_count: u32_at(&payload, at + 12),
                entry_count: u32_at(&payload, at + 16) as usize,
                offset: at + OBJECT_HEADER_BYTES,
            };
            if meta.fragment_index >= meta.fragment_count {
                return Err(fail(format!("row {}: bad fragment numbering", meta.row_id)));
            }
            at = meta.offset + meta.entry_count * ENTRY_BYTES;
            if at > payload.len() {
                return Err(fail(format!(
                    "row {}: entries overrun the payload",
                    meta.row_id
                )));
            }
            if objects
                .last()
                .is_some_and(|p: &ObjectMeta| p.row_id >= meta.row_id)
            {
                return Err(fail("objects out of row order".into()));
            }
            objects.push(meta);
        }
        if at != payload.len() {
            return Err(fail("payload length disagrees with its objects".into()));
        }
        Ok(Block {
            index: expected_index,
            payload,
            objects,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn objects(&self) -> &[ObjectMeta] {
        &self.objects
    }

    pub fn entries(&self, object: &ObjectMeta) -> EntryBytes<'_> {
        EntryBytes(&self.payload[object.offset..object.offset + object.entry_count * ENTRY_BYTES])
    }

    /// Position of the object for `row_id` in this block.
    pub fn find(&self, row_id: usize) -> Option<usize> {
        self.objects
            .binary_search_by_key(&row_id, |o| o.row_id)
            .ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_block(index: u64, objects: &[(usize, u32, u32, &[Entry])], size: usize) -> Vec<u8> {
        let mut payload = Vec::new();
        for &(row, fi, fc, e) in objects {
            encode_object_header(&mut payload, row, fi, fc, e.len());
            encode_entries(&mut payload, e);
        }
        let mut h = BlockHeader {
            block_index: index,
            object_count: objects.len() as u32,
            payload_bytes: payload.len() as u32,
            checksum: 0,
        };
        h.checksum = h.compute_checksum(&payload);
        let mut raw = h.encode().to_vec();
        raw.extend_from_slice(&payload);
        raw.resize(size, 0);
        raw
    }

    #[test]
    fn header_layout_is_little_endian() {
        let h = BlockHeader {
            block_index: 0x0102,
            object_count: 3,
            payload_bytes: 0x10,
            checksum: 0xAABBCCDD,
        };
        let b = h.encode();
        assert_eq!(&b[0..4], b"OCBK");
        assert_eq!(b[4], 0x02);
        assert_eq!(b[5], 0x01);
        assert_eq!(b[12], 3);
        assert_eq!(b[16], 0x10);
        assert_eq!(&b[20..24], &[0xDD, 0xCC, 0xBB, 0xAA]);
        assert_eq!(BlockHeader::decode(&b).unwrap(), h);
    }

    #[test]
    fn decode_round_trip() {
        let e0: &[Entry] = &[(1, 2.0), (3, -1.5)];
        let raw = raw_block(5, &[(7, 0, 1, e0), (8, 0, 1, &[])], 256);
        let block = Block::decode(raw, 5).unwrap();
        assert_eq!(block.objects().len(), 2);
        let o = block.objects()[0];
        assert_eq!(o.row_id, 7);
        assert_eq!(block.entries(&o).to_vec(), e0.to_vec());
        assert_eq!(block.entries(&o).entry(1), (3, -1.5));
        assert_eq!(block.find(8), Some(1));
        assert_eq!(block.find(9), None);
    }

    #[test]
    fn corruption_is_detected() {
        let e0: &[Entry] = &[(1, 2.0)];
        let mut raw = raw_block(0, &[(0, 0, 1, e0)], 128);
        raw[BLOCK_HEADER_BYTES + OBJECT_HEADER_BYTES + 9] ^= 0x40;
        let err = Block::decode(raw, 0).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");

        let raw = raw_block(0, &[(0, 0, 1, e0)], 128);
        assert!(Block::decode(raw.clone(), 1).is_err());
        let mut bad_magic = raw;
        bad_magic[0] = b'X';
        assert!(Block::decode(bad_magic, 0).is_err());
    }

    #[test]
    fn block_size_bounds() {
        assert!(check_block_size(MIN_BLOCK_SIZE - 1).is_err());
        assert!(check_block_size(MIN_BLOCK_SIZE).is_ok());
        assert!(check_block_size(DEFAULT_BLOCK_SIZE).is_ok());
    }
}
