//! Embedding sets and the TEMB on-disk format.
//!
//! Layout (all integers little-endian, no padding):
//!
//! ```text
//! "TEMB" | u16 version = 1 | u8 dtype = 1 (f32) | u64 n | u64 d
//! u32 id_count (= n) | n × (u32 byte_len, UTF-8 bytes)
//! n·d × f32, row-major
//! ```
//!
//! Values are stored as `f32` and promoted to `f64` whenever metrics are
//! computed.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TEMB";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    data: Vec<f32>,
    dim: usize,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    /// Builds a set from row-major `f32` data, validating every invariant.
    pub fn new(ids: Vec<String>, data: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::MalformedHeader("dimension must be at least 1".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::MalformedHeader(format!(
                "{} values do not fill {} rows of dimension {dim}",
                data.len(),
                ids.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self { ids, data, dim, index })
    }

    /// Builds a set from `f64` rows, quantizing every value to `f32`.
    ///
    /// In-memory callers go through this so their results match the values
    /// a TEMB round trip would produce.
    pub fn from_f64_rows(ids: Vec<String>, rows: &[f64], dim: usize) -> Result<Self> {
        Self::new(ids, rows.iter().map(|&v| v as f32).collect(), dim)
    }

    /// Convenience constructor with ids `"0"`, `"1"`, ... in row order.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend(r.iter().map(|&v| v as f32));
        }
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(ids, data, dim)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), dim)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), self.dim), |(i, j)| self.data[i * self.dim + j] as f64)
    }

    pub fn select_f64(&self, rows: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), self.dim), |(i, j)| {
            self.data[rows[i] * self.dim + j] as f64
        })
    }

    /// A new set holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> EmbeddingSet {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            ids.push(self.ids[r].clone());
        }
        // Rows of a valid set stay valid; only repeated indices can fail here.
        EmbeddingSet::new(ids, data, self.dim).expect("subset rows must be distinct")
    }

    pub fn to_temb_bytes(&self) -> Vec<u8> {
        let id_bytes: usize = self.ids.iter().map(|s| 4 + s.len()).sum();
        let mut out = Vec::with_capacity(4 + 2 + 1 + 16 + 4 + id_bytes + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(DTYPE_F32);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for id in &self.ids {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_temb_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dtype = r.take(1)?[0];
        if dtype != DTYPE_F32 {
            return Err(Error::UnsupportedDtype(dtype));
        }
        let n = u64::from_le_bytes(r.array()?);
        let d = u64::from_le_bytes(r.array()?);
        let id_count = u32::from_le_bytes(r.array()?);
        if id_count as u64 != n {
            return Err(Error::MalformedHeader(format!(
                "id count {id_count} does not match row count {n}"
            )));
        }
        if d == 0 {
            return Err(Error::MalformedHeader("dimension must be at least 1".into()));
        }
        let n = n as usize;
        let d = usize::try_from(d).map_err(|_| Error::MalformedHeader(format!("dimension {d} too large")))?;
        let mut ids = Vec::with_capacity(n.min(1 << 20));
        for row in 0..n {
            let len = u32::from_le_bytes(r.array()?) as usize;
            let raw = r.take(len)?;
            let id = std::str::from_utf8(raw).map_err(|_| Error::InvalidId(row))?;
            ids.push(id.to_owned());
        }
        let count = n
            .checked_mul(d)
            .ok_or_else(|| Error::MalformedHeader("n·d overflows".into()))?;
        let payload = r.take(
            count
                .checked_mul(4)
                .ok_or_else(|| Error::MalformedHeader("payload size overflows".into()))?,
        )?;
        if r.pos != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - r.pos));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(ids, data, d)
    }

    pub fn write_temb(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|source| Error::File {
            path: path.into(),
            source,
        })?;
        f.write_all(&self.to_temb_bytes())?;
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if len > remaining {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: len - remaining,
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::File {
        path: path.into(),
        source,
    })?;
    EmbeddingSet::from_temb_bytes(&bytes)
}

/// Loads the small-scale CSV alternative: header `sample_id,<d columns>`.
pub fn load_embeddings_csv(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| Error::File {
        path: path.into(),
        source,
    })?;
    read_embeddings_csv(file)
}

pub fn read_embeddings_csv<R: std::io::Read>(reader: R) -> Result<EmbeddingSet> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("sample_id") {
        return Err(Error::MalformedRecord {
            line: 1,
            message: "first column must be sample_id".into(),
        });
    }
    let dim = headers.len() - 1;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        ids.push(rec[0].to_owned());
        for field in rec.iter().skip(1) {
            let v: f32 = field.trim().parse().map_err(|_| Error::MalformedRecord {
                line,
                message: format!("not a number: {field:?}"),
            })?;
            data.push(v);
        }
    }
    EmbeddingSet::new(ids, data, dim)
}

/// Dispatches on extension: `.csv` goes through the CSV reader, anything
/// else is treated as TEMB.
pub fn load_any(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_embeddings_csv(path),
        _ => load_embeddings(path),
    }
}
