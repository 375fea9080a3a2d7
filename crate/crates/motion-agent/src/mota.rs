//! MOTA motion files: a little-endian binary layout and a JSON sidecar with
//! the same field names.
//!
//! ```text
//! "MOTA" | u32 version | u32 T | u32 D | f32 fps | u32 J
//! J × u32 parent | J × 3 f32 bone offsets | T × D f32 frames
//! ```

use std::fs;
use std::path::Path;

use motion_agent_core::motion::{MotionSequence, SkeletonSpec};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 4] = b"MOTA";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic {found:?} at offset 0")]
    Magic { found: [u8; 4] },
    #[error("unsupported version {version} at offset 4")]
    Version { version: u32 },
    #[error("truncated at offset {offset}: need {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("{trailing} trailing bytes after offset {offset}")]
    Trailing { offset: usize, trailing: usize },
    #[error("D = {d} at offset 12 does not match J = {j} (expected {expected})")]
    Dimension { d: usize, j: usize, expected: usize },
    #[error("invalid motion: {0}")]
    Motion(#[from] motion_agent_core::MotionError),
    #[error("json sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// JSON form, field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct MotaJson {
    pub version: u32,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub fps: f32,
    #[serde(rename = "J")]
    pub j: usize,
    pub parent: Vec<usize>,
    pub bone_offsets: Vec<[f32; 3]>,
    /// `T` rows of `D` values.
    pub frames: Vec<Vec<f32>>,
}

impl MotaJson {
    pub fn from_motion(m: &MotionSequence) -> Self {
        let s = m.skeleton();
        Self {
            version: VERSION,
            t: m.num_frames(),
            d: m.dim(),
            fps: m.fps(),
            j: s.joint_count,
            parent: s.parent.clone(),
            bone_offsets: s.bone_offsets.clone(),
            frames: m.frames().chunks(m.dim()).map(<[f32]>::to_vec).collect(),
        }
    }

    pub fn into_motion(self) -> Result<MotionSequence, FormatError> {
        if self.version != VERSION {
            return Err(FormatError::Version { version: self.version });
        }
        let expected = 4 + 3 * self.j.saturating_sub(1);
        if self.d != expected || self.parent.len() != self.j || self.bone_offsets.len() != self.j {
            return Err(FormatError::Dimension { d: self.d, j: self.j, expected });
        }
        if self.frames.len() != self.t || self.frames.iter().any(|r| r.len() != self.d) {
            return Err(FormatError::Truncated { offset: 0, needed: self.t * self.d });
        }
        let skeleton = SkeletonSpec::new(self.parent, self.bone_offsets)?;
        Ok(MotionSequence::new(self.frames.concat(), self.fps, skeleton)?)
    }
}

pub fn encode(m: &MotionSequence) -> Vec<u8> {
    let s = m.skeleton();
    let mut out = Vec::with_capacity(24 + s.joint_count * 16 + m.frames().len() * 4);
    out.extend_from_slice(MAGIC);
    for v in [VERSION, m.num_frames() as u32, m.dim() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&m.fps().to_le_bytes());
    out.extend_from_slice(&(s.joint_count as u32).to_le_bytes());
    for &p in &s.parent {
        out.extend_from_slice(&(p as u32).to_le_bytes());
    }
    for o in &s.bone_offsets {
        for v in o {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in m.frames() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FormatError> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::Truncated { offset: self.pos, needed: n - (self.buf.len() - self.pos) });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(buf: &[u8]) -> Result<MotionSequence, FormatError> {
    let mut r = Reader { buf, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(FormatError::Magic { found: magic });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::Version { version });
    }
    let t = r.u32()? as usize;
    let d = r.u32()? as usize;
    let fps = r.f32()?;
    let j = r.u32()? as usize;
    let expected = 4 + 3 * j.saturating_sub(1);
    if j == 0 || d != expected {
        return Err(FormatError::Dimension { d, j, expected });
    }
    let parent = (0..j).map(|_| r.u32().map(|p| p as usize)).collect::<Result<Vec<_>, _>>()?;
    let mut offsets = Vec::with_capacity(j);
    for _ in 0..j {
        offsets.push([r.f32()?, r.f32()?, r.f32()?]);
    }
    let frames = (0..t * d).map(|_| r.f32()).collect::<Result<Vec<_>, _>>()?;
    if r.pos != buf.len() {
        return Err(FormatError::Trailing { offset: r.pos, trailing: buf.len() - r.pos });
    }
    let skeleton = SkeletonSpec::new(parent, offsets)?;
    Ok(MotionSequence::new(frames, fps, skeleton)?)
}

pub fn to_json(m: &MotionSequence) -> String {
    serde_json::to_string_pretty(&MotaJson::from_motion(m)).expect("motion serializes")
}

pub fn from_json(text: &str) -> Result<MotionSequence, FormatError> {
    serde_json::from_str::<MotaJson>(text)?.into_motion()
}

/// Reads either form; JSON is recognised by a leading `{`.
pub fn read_motion(path: &Path) -> Result<MotionSequence, FormatError> {
    let bytes = fs::read(path)?;
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => from_json(std::str::from_utf8(&bytes).map_err(|e| std::io::Error::other(e))?),
        _ => decode(&bytes),
    }
}

/// Writes the JSON sidecar for a `.json` extension, the binary form otherwise.
pub fn write_motion(m: &MotionSequence, path: &Path) -> Result<(), FormatError> {
    if path.extension().is_some_and(|e| e == "json") {
        fs::write(path, to_json(m))?;
    } else {
        fs::write(path, encode(m))?;
    }
    Ok(())
}
