//! Versioned binary container shared by the codec and model artifacts.
//!
//! ```text
//! "MAGC" | u32 version | str kind | str header JSON
//! u32 blob count | (str name | u64 len | len × f64)*
//! str config JSON | 32-byte SHA-256 of everything before it
//! ```
//! `str` is a u64 byte length followed by UTF-8. All integers little-endian.

use std::fs;
use std::path::Path;

use motion_agent_core::hash::{sha256, to_hex};
use serde_json::Value;

pub const MAGIC: &[u8; 4] = b"MAGC";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("not an artifact container (magic {0:?})")]
    Magic([u8; 4]),
    #[error("unsupported container version {0}")]
    Version(u32),
    #[error("container truncated at offset {0}")]
    Truncated(usize),
    #[error("checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },
    #[error("expected a {expected} artifact, found {found}")]
    Kind { expected: String, found: String },
    #[error("missing or malformed field '{0}'")]
    Field(String),
    #[error("blob '{name}' has {got} values, expected {expected}")]
    BlobSize { name: String, expected: usize, got: usize },
    #[error("{what} hash mismatch: recorded {recorded}, recomputed {computed}")]
    Hash { what: String, recorded: String, computed: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub header: Value,
    pub blobs: Vec<(String, Vec<f64>)>,
    pub config: Value,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        if self.buf.len().saturating_sub(self.pos) < n {
            return Err(ArtifactError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ArtifactError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize, ArtifactError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")) as usize)
    }

    fn string(&mut self) -> Result<String, ArtifactError> {
        let n = self.u64()?;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| ArtifactError::Truncated(at))
    }
}

impl Container {
    pub fn new(kind: &str, header: Value, config: Value) -> Self {
        Self { kind: kind.into(), header, blobs: Vec::new(), config }
    }

    pub fn push(&mut self, name: impl Into<String>, values: &[f64]) {
        self.blobs.push((name.into(), values.to_vec()));
    }

    pub fn blob(&self, name: &str) -> Result<&[f64], ArtifactError> {
        self.blobs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| ArtifactError::Field(name.into()))
    }

    /// Copies blob `name` into `dst`, which fixes the expected length.
    pub fn fill(&self, name: &str, dst: &mut [f64]) -> Result<(), ArtifactError> {
        let src = self.blob(name)?;
        if src.len() != dst.len() {
            return Err(ArtifactError::BlobSize { name: name.into(), expected: dst.len(), got: src.len() });
        }
        dst.copy_from_slice(src);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        put_str(&mut out, &self.header.to_string());
        out.extend_from_slice(&(self.blobs.len() as u32).to_le_bytes());
        for (name, values) in &self.blobs {
            put_str(&mut out, name);
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        put_str(&mut out, &self.config.to_string());
        let digest = sha256(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, ArtifactError> {
        if buf.len() < 40 {
            return Err(ArtifactError::Truncated(buf.len()));
        }
        let (body, stored) = buf.split_at(buf.len() - 32);
        let magic: [u8; 4] = body[..4].try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(ArtifactError::Magic(magic));
        }
        let computed = sha256(body);
        if computed != stored {
            return Err(ArtifactError::Checksum { stored: to_hex(stored), computed: to_hex(&computed) });
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(ArtifactError::Version(version));
        }
        let kind = r.string()?;
        let header = serde_json::from_str(&r.string()?)?;
        let count = r.u32()? as usize;
        let mut blobs = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.string()?;
            let n = r.u64()?;
            let raw = r.take(n.checked_mul(8).ok_or(ArtifactError::Truncated(r.pos))?)?;
            blobs.push((name, raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()));
        }
        let config = serde_json::from_str(&r.string()?)?;
        if r.pos != body.len() {
            return Err(ArtifactError::Truncated(r.pos));
        }
        Ok(Self { kind, header, blobs, config })
    }

    /// SHA-256 of the serialized container.
    pub fn digest(&self) -> String {
        let bytes = self.to_bytes();
        to_hex(&bytes[bytes.len() - 32..])
    }

    pub fn write(&self, path: &Path) -> Result<(), ArtifactError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path, expected_kind: &str) -> Result<Self, ArtifactError> {
        let c = Self::from_bytes(&fs::read(path)?)?;
        if c.kind != expected_kind {
            return Err(ArtifactError::Kind { expected: expected_kind.into(), found: c.kind });
        }
        Ok(c)
    }
}

/// Deserializes `header[key]`.
pub fn field<T: serde::de::DeserializeOwned>(header: &Value, key: &str) -> Result<T, ArtifactError> {
    let v = header.get(key).ok_or_else(|| ArtifactError::Field(key.into()))?;
    serde_json::from_value(v.clone()).map_err(|_| ArtifactError::Field(key.into()))
}
