//! Binary dataset bundle.
//!
//! All integers little-endian:
//!
//! ```text
//! magic            4 bytes  "SSQB"
//! version          u32      BUNDLE_VERSION
//! num_users        u32
//! num_items        u32
//! max_len          u32
//! num_categories   u32      including the "unknown" slot 0
//! num_interactions u64
//! item ids         num_items × (u32 byte length, UTF-8 bytes)
//! user ids         num_users × (u32 byte length, UTF-8 bytes)
//! category names   (num_categories - 1) × (u32 byte length, UTF-8 bytes)
//! item categories  (num_items + 1) × u32, slot 0 is padding
//! offsets          (num_users + 1) × u64 into the item array
//! items            num_interactions × u32
//! crc32            u32 over every preceding byte
//! ```

use std::path::Path;

use serde::Serialize;

use crate::data::SequenceDataset;
use crate::error::{Error, Result};

pub const BUNDLE_MAGIC: [u8; 4] = *b"SSQB";
pub const BUNDLE_VERSION: u32 = 1;

/// Dataset summary written next to the bundle.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DatasetStats {
    pub schema_version: u32,
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    /// Fraction of the user-item matrix that is observed.
    pub density: f64,
    pub avg_per_user: f64,
}

impl DatasetStats {
    pub fn of(ds: &SequenceDataset) -> Self {
        let users = ds.num_users();
        let items = ds.num_items();
        let interactions = ds.num_interactions();
        DatasetStats {
            schema_version: crate::SCHEMA_VERSION,
            users,
            items,
            interactions,
            density: interactions as f64 / (users as f64 * items as f64),
            avg_per_user: interactions as f64 / users as f64,
        }
    }
}

pub fn encode_bundle(ds: &SequenceDataset) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&BUNDLE_MAGIC);
    put_u32(&mut b, BUNDLE_VERSION);
    put_u32(&mut b, ds.num_users() as u32);
    put_u32(&mut b, ds.num_items() as u32);
    put_u32(&mut b, ds.max_len as u32);
    put_u32(&mut b, ds.category_names.len() as u32);
    b.extend_from_slice(&(ds.num_interactions() as u64).to_le_bytes());
    for s in &ds.item_ids[1..] {
        put_str(&mut b, s);
    }
    for s in &ds.user_ids {
        put_str(&mut b, s);
    }
    for s in &ds.category_names[1..] {
        put_str(&mut b, s);
    }
    for &c in &ds.item_categories {
        put_u32(&mut b, c);
    }
    let mut off = 0u64;
    b.extend_from_slice(&off.to_le_bytes());
    for seq in &ds.sequences {
        off += seq.len() as u64;
        b.extend_from_slice(&off.to_le_bytes());
    }
    for seq in &ds.sequences {
        for &v in seq {
            put_u32(&mut b, v);
        }
    }
    let crc = crc32fast::hash(&b);
    put_u32(&mut b, crc);
    b
}

pub fn decode_bundle(bytes: &[u8]) -> Result<SequenceDataset> {
    if bytes.len() < 4 + 4 {
        return Err(Error::Format("bundle is truncated".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != BUNDLE_MAGIC {
        return Err(Error::Format("not a dataset bundle (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != BUNDLE_VERSION {
        return Err(Error::Format(format!(
            "unsupported bundle version {version}, expected {BUNDLE_VERSION}"
        )));
    }
    let stored_crc = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::Format("bundle checksum mismatch".into()));
    }
    let num_users = r.u32()? as usize;
    let num_items = r.u32()? as usize;
    let max_len = r.u32()? as usize;
    let num_categories = r.u32()? as usize;
    let total = r.u64()? as usize;
    if num_categories == 0 {
        return Err(Error::Format("category table lacks the unknown slot".into()));
    }

    let mut item_ids = vec![String::new()];
    for _ in 0..num_items {
        item_ids.push(r.string()?);
    }
    let user_ids = (0..num_users).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let mut category_names = vec![String::new()];
    for _ in 1..num_categories {
        category_names.push(r.string()?);
    }
    let item_categories = (0..=num_items).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    if item_categories.iter().any(|&c| c as usize >= num_categories) {
        return Err(Error::Format("item category out of range".into()));
    }
    let offsets = (0..=num_users).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    if offsets.last().copied() != Some(total as u64) || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Format("inconsistent sequence offsets".into()));
    }
    let items = (0..total).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    if items.iter().any(|&v| v == 0 || v as usize > num_items) {
        return Err(Error::Format("item id out of range".into()));
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes in bundle".into()));
    }
    let sequences = offsets
        .windows(2)
        .map(|w| items[w[0] as usize..w[1] as usize].to_vec())
        .collect();
    Ok(SequenceDataset::from_parts(
        user_ids,
        item_ids,
        sequences,
        max_len,
        item_categories,
        category_names,
    ))
}

pub fn write_bundle(ds: &SequenceDataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode_bundle(ds)).map_err(|e| Error::io(path, e))
}

pub fn read_bundle(path: &Path) -> Result<SequenceDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bundle(&bytes)
}

fn put_u32(b: &mut Vec<u8>, v: u32) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_str(b: &mut Vec<u8>, s: &str) {
    put_u32(b, s.len() as u32);
    b.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("bundle is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Format("invalid UTF-8 in bundle".into()))
    }
}
