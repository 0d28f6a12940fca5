//! Binary feature container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic    "FEAT"                 4 bytes
//! version  u32 = 1
//! N        u64                    rows
//! D        u32                    columns
//! ids      N × (u16 length, UTF-8 bytes)
//! values   N·D × f32              row-major
//! ```
//!
//! Values are stored in single precision; a matrix round-trips bit-exactly
//! when its values are representable as `f32`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::feature_matrix::FeatureMatrix;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"FEAT";
pub const VERSION: u32 = 1;

pub fn encode_features<T: Scalar>(m: &FeatureMatrix<T>) -> Result<Vec<u8>> {
    let dim = u32::try_from(m.dim())
        .map_err(|_| Error::validation(format!("dimension {} does not fit in u32", m.dim())))?;
    let mut out = Vec::with_capacity(20 + m.len() * (8 + 4 * m.dim()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.len() as u64).to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for id in m.ids() {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::validation(format!("id {id:?} longer than 65535 bytes")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for &v in m.data() {
        let v = num_traits::ToPrimitive::to_f32(&v).unwrap_or(f32::NAN);
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.bytes.len() as u64,
                format!(
                    "truncated while reading {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            )),
        }
    }

    fn array<const K: usize>(&mut self, what: &str) -> Result<[u8; K]> {
        Ok(self.take(K, what)?.try_into().expect("length checked"))
    }
}

pub fn decode_features<T: Scalar>(bytes: &[u8]) -> Result<FeatureMatrix<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.is_empty() {
        return Err(Error::format(0, "empty file"));
    }
    let magic = cur.array::<4>("magic")?;
    if &magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"FEAT\"")));
    }
    let version = u32::from_le_bytes(cur.array("version")?);
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(cur.array("row count")?);
    let d = u32::from_le_bytes(cur.array("dimension")?) as usize;
    let n = usize::try_from(n).map_err(|_| Error::format(8, "row count too large"))?;
    if n == 0 || d == 0 {
        return Err(Error::format(8, format!("empty matrix (N={n}, D={d})")));
    }

    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for row in 0..n {
        let at = cur.pos as u64;
        let len = u16::from_le_bytes(cur.array("id length")?) as usize;
        let raw = cur.take(len, "id bytes")?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| Error::format(at, format!("id of row {row} is not valid UTF-8")))?;
        ids.push(id.to_owned());
    }

    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::format(8, "N·D overflows"))?;
    let payload_at = cur.pos;
    let have = (bytes.len() - payload_at) / 4;
    if have < count {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: expected {count} values, found {have}"),
        ));
    }
    let payload = cur.take(count * 4, "values")?;
    if cur.pos != bytes.len() {
        return Err(Error::format(
            cur.pos as u64,
            format!("{} trailing bytes after payload", bytes.len() - cur.pos),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
        .collect();
    FeatureMatrix::new(ids, data, d)
}

pub fn write_features<T: Scalar>(m: &FeatureMatrix<T>, path: &Path) -> Result<()> {
    let bytes = encode_features(m)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_features<T: Scalar>(path: &Path) -> Result<FeatureMatrix<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}
