//! WNDR vector file format.
//!
//! ```text
//! "WNDR1\n"
//! "dim=<u32> count=<u64>\n"
//! count × { u16 LE key length, key bytes (UTF-8), dim × f32 LE }
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::StoreError;

pub const MAGIC: &[u8] = b"WNDR1\n";
const MAX_HEADER_LINE: usize = 128;

/// Keyed table of equal-length `f32` vectors, kept in insertion order and
/// laid out contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    keys: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Self {
        VectorTable { dim, keys: Vec::new(), data: Vec::new(), index: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn push(&mut self, key: impl Into<String>, vector: &[f32]) -> Result<(), StoreError> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(StoreError::DimensionMismatch { expected: self.dim, got: vector.len() });
        }
        if key.len() > u16::MAX as usize {
            return Err(StoreError::CorruptHeader(format!("key of {} bytes is too long", key.len())));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(StoreError::NonFinite(key));
        }
        if self.index.contains_key(&key) {
            return Err(StoreError::DuplicateKey(key));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.index.get(key).map(|&i| self.row(i))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn key(&self, i: usize) -> &str {
        &self.keys[i]
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.keys.iter().map(String::as_str).zip(self.data.chunks_exact(self.dim.max(1)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.data.len() * 4 + self.keys.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(format!("dim={} count={}\n", self.dim, self.keys.len()).as_bytes());
        for (key, vec) in self.iter() {
            out.extend_from_slice(&(key.len() as u16).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for x in vec {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let corrupt = |msg: &str| StoreError::CorruptHeader(msg.to_owned());
        let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| corrupt("missing WNDR1 magic"))?;
        let nl = rest
            .iter()
            .take(MAX_HEADER_LINE)
            .position(|&b| b == b'\n')
            .ok_or_else(|| corrupt("unterminated header line"))?;
        let header = std::str::from_utf8(&rest[..nl]).map_err(|_| corrupt("header is not UTF-8"))?;
        let (dim, count) = parse_header(header).ok_or_else(|| corrupt("header must read `dim=<u32> count=<u64>`"))?;
        if dim == 0 {
            return Err(corrupt("dim must be positive"));
        }
        let mut cursor = &rest[nl + 1..];
        let mut table = VectorTable::new(dim as usize);
        let mut vector = vec![0f32; dim as usize];
        for _ in 0..count {
            let (len, tail) = split(cursor, 2).ok_or_else(|| corrupt("payload shorter than header count"))?;
            let key_len = u16::from_le_bytes([len[0], len[1]]) as usize;
            let (key, tail) = split(tail, key_len).ok_or_else(|| corrupt("payload shorter than header count"))?;
            let key = std::str::from_utf8(key).map_err(|_| corrupt("key is not UTF-8"))?;
            let (payload, tail) =
                split(tail, dim as usize * 4).ok_or_else(|| corrupt("payload shorter than header count"))?;
            for (x, chunk) in vector.iter_mut().zip(payload.chunks_exact(4)) {
                *x = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            }
            table.push(key, &vector)?;
            cursor = tail;
        }
        if !cursor.is_empty() {
            return Err(corrupt("trailing bytes after the last record"));
        }
        Ok(table)
    }
}

fn split(bytes: &[u8], n: usize) -> Option<(&[u8], &[u8])> {
    (bytes.len() >= n).then(|| bytes.split_at(n))
}

fn parse_header(line: &str) -> Option<(u32, u64)> {
    let mut parts = line.split(' ');
    let dim = parts.next()?.strip_prefix("dim=")?.parse().ok()?;
    let count = parts.next()?.strip_prefix("count=")?.parse().ok()?;
    parts.next().is_none().then_some((dim, count))
}

pub fn read_table(path: impl AsRef<Path>) -> Result<VectorTable, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| StoreError::io(path, e))?;
    VectorTable::from_bytes(&bytes)
}

pub fn write_table(path: impl AsRef<Path>, table: &VectorTable) -> Result<(), StoreError> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| StoreError::io(path, e))?;
    f.write_all(&table.to_bytes()).map_err(|e| StoreError::io(path, e))
}
