//! LRF1: one utterance's layered hidden states.
//!
//! ```text
//! "LRF1" | u16 version | u32 id_len | id (UTF-8) | u32 d | u32 L_e | u32 L_d
//! | per encoder layer: u32 m, m*d f32 | per decoder layer: u32 n, n*d f32
//! | u32 CRC-32 of every preceding byte
//! ```
//! All integers and floats are little-endian; matrices are row-major.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::adapter::LayeredRepresentation;
use crate::nn::Matrix;

pub const MAGIC: &[u8; 4] = b"LRF1";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum LrfError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic at byte 0: expected LRF1, found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported version {found} at byte 4 (supported: {VERSION})")]
    Version { found: u16 },
    #[error("truncated {what} at byte {offset}: need {needed} bytes, {available} available")]
    Truncated {
        what: &'static str,
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{extra} unexpected bytes at byte {offset} before the checksum")]
    Trailing { offset: usize, extra: usize },
    #[error("CRC mismatch at byte {offset}: stored {stored:08x}, computed {computed:08x}")]
    Crc { offset: usize, stored: u32, computed: u32 },
    #[error("invalid utterance id at byte {offset}: not UTF-8")]
    Utf8 { offset: usize },
    #[error("invalid contents: {0}")]
    Invalid(String),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], LrfError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(LrfError::Truncated {
                what,
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, LrfError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn matrix(&mut self, dim: usize, what: &'static str) -> Result<Matrix, LrfError> {
        let rows = self.u32(what)? as usize;
        let n_bytes = rows
            .checked_mul(dim)
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| LrfError::Invalid(format!("{what} of {rows}x{dim} overflows")))?;
        let raw = self.take(n_bytes, what)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        Ok(Matrix::from_vec(rows, dim, data).expect("length checked"))
    }
}

pub fn encode_lrf(rep: &LayeredRepresentation) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(rep.utterance_id.len() as u32).to_le_bytes());
    out.extend_from_slice(rep.utterance_id.as_bytes());
    out.extend_from_slice(&(rep.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(rep.encoder_layers().len() as u32).to_le_bytes());
    out.extend_from_slice(&(rep.decoder_layers().len() as u32).to_le_bytes());
    for m in rep.encoder_layers().iter().chain(rep.decoder_layers()) {
        out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        for &v in m.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_lrf(bytes: &[u8]) -> Result<LayeredRepresentation, LrfError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(LrfError::BadMagic {
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let v = cur.take(2, "version")?;
    let version = u16::from_le_bytes([v[0], v[1]]);
    if version != VERSION {
        return Err(LrfError::Version { found: version });
    }
    let id_len = cur.u32("id length")? as usize;
    let id_at = cur.pos;
    let id = std::str::from_utf8(cur.take(id_len, "utterance id")?)
        .map_err(|_| LrfError::Utf8 { offset: id_at })?
        .to_string();
    let dim = cur.u32("d")? as usize;
    let l_e = cur.u32("L_e")? as usize;
    let l_d = cur.u32("L_d")? as usize;
    // each layer needs at least its 4-byte count
    let header_end = cur.pos;
    let min_layers = l_e.saturating_add(l_d).saturating_mul(4);
    if min_layers > bytes.len().saturating_sub(header_end) {
        return Err(LrfError::Truncated {
            what: "layer table",
            offset: header_end,
            needed: min_layers,
            available: bytes.len() - header_end,
        });
    }
    let encoder = (0..l_e).map(|_| cur.matrix(dim, "encoder layer")).collect::<Result<Vec<_>, _>>()?;
    let decoder = (0..l_d).map(|_| cur.matrix(dim, "decoder layer")).collect::<Result<Vec<_>, _>>()?;
    let crc_at = cur.pos;
    let stored = cur.u32("checksum")?;
    if cur.pos != bytes.len() {
        return Err(LrfError::Trailing {
            offset: crc_at,
            extra: bytes.len() - cur.pos,
        });
    }
    let computed = crc32fast::hash(&bytes[..crc_at]);
    if stored != computed {
        return Err(LrfError::Crc {
            offset: crc_at,
            stored,
            computed,
        });
    }
    LayeredRepresentation::new(id, dim, encoder, decoder).map_err(|e| LrfError::Invalid(e.to_string()))
}

pub fn write_lrf(rep: &LayeredRepresentation, path: impl AsRef<Path>) -> Result<(), LrfError> {
    let path = path.as_ref();
    fs::write(path, encode_lrf(rep)).map_err(|source| LrfError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_lrf(path: impl AsRef<Path>) -> Result<LayeredRepresentation, LrfError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| LrfError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_lrf(&bytes)
}
