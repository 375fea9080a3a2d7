//! Motion tokenizer/detokenizer: temporal encoder, EMA codebook quantizer
//! and decoder, with the three-term training objective.

mod codebook;
pub mod conv;
mod loss;
mod network;
mod tokens;
mod train;

pub use codebook::Codebook;
pub use loss::{backward, vq_loss, vq_step_raw, LossWeights, VqLossReport, VqStep};
pub use network::{EncoderDecoderParams, FeatureNorm};
pub use tokens::{MotionTokenSeq, TokenParseError};
pub use train::{
    codebook_usage, reconstruction_l1, train_vq, EpochLog, StopReason, TrainLog, TrainVqConfig, TrainVqError,
};

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::hash::Hasher;
use crate::motion::{JointPositions, MotionError, MotionSequence, SkeletonSpec};
use crate::optim::ParamSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("sequence of {frames} frames is not a multiple of the downsampling rate {downsample}")]
    Length { frames: usize, downsample: usize },
    #[error("latent width {got} does not match codec width {expected}")]
    Shape { expected: usize, got: usize },
    #[error("token id {id} outside the codebook of size {size}")]
    Vocabulary { id: usize, size: usize },
    #[error("empty token sequence")]
    EmptyTokens,
    #[error("loss or gradient became non-finite")]
    Divergence,
    #[error("invalid codec config: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error(transparent)]
    Motion(#[from] MotionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub feature_dim: usize,
    /// Hidden channel count of the conv stacks.
    pub width: usize,
    /// Latent/code width `d`.
    pub latent_dim: usize,
    /// Temporal downsampling rate `N` (power of two).
    pub downsample: usize,
    /// Codebook size `K`.
    pub codebook_size: usize,
    pub decay: f64,
    pub epsilon: f64,
    /// Updates a code may go unassigned before it is re-seeded.
    pub reset_age: u32,
    pub alpha: f64,
    pub beta: f64,
}

impl CodecConfig {
    /// Laptop-scale profile: K = 64, d = 64, N = 4.
    pub fn desk(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            width: 64,
            latent_dim: 64,
            downsample: 4,
            codebook_size: 64,
            decay: 0.99,
            epsilon: 1e-5,
            reset_age: 256,
            alpha: 0.5,
            beta: 0.02,
        }
    }

    /// Full-size profile: K = 512, d = 512, N = 4.
    pub fn full(feature_dim: usize) -> Self {
        Self { width: 512, latent_dim: 512, codebook_size: 512, ..Self::desk(feature_dim) }
    }

    pub fn levels(&self) -> usize {
        self.downsample.trailing_zeros() as usize
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if !self.downsample.is_power_of_two() {
            return Err(CodecError::Config(alloc::format!("downsample {} is not a power of two", self.downsample)));
        }
        if self.codebook_size < 2 || self.latent_dim == 0 || self.width == 0 || self.feature_dim == 0 {
            return Err(CodecError::Config("K >= 2 and positive widths required".into()));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) || !(self.epsilon > 0.0) {
            return Err(CodecError::Config("decay in (0,1) and epsilon > 0 required".into()));
        }
        Ok(())
    }
}

/// Encoder outputs or gathered codes, `len × dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSeq {
    pub data: Vec<f64>,
    pub len: usize,
    pub dim: usize,
}

pub fn encode(params: &EncoderDecoderParams, seq: &MotionSequence) -> Result<LatentSeq, CodecError> {
    let t = seq.num_frames();
    if t % params.downsample != 0 {
        return Err(CodecError::Length { frames: t, downsample: params.downsample });
    }
    let (data, len) = params.encode_frames(&seq.to_f64(), t);
    Ok(LatentSeq { data, len, dim: params.latent_dim() })
}

pub fn quantize(cb: &Codebook, z: &LatentSeq) -> Result<(MotionTokenSeq, LatentSeq), CodecError> {
    if z.dim != cb.dim {
        return Err(CodecError::Shape { expected: cb.dim, got: z.dim });
    }
    let (ids, zq) = cb.quantize(&z.data);
    Ok((MotionTokenSeq::new(ids), LatentSeq { data: zq, len: z.len, dim: z.dim }))
}

pub fn decode(
    params: &EncoderDecoderParams,
    zq: &LatentSeq,
    fps: f32,
    skeleton: &SkeletonSpec,
) -> Result<MotionSequence, CodecError> {
    if zq.dim != params.latent_dim() {
        return Err(CodecError::Shape { expected: params.latent_dim(), got: zq.dim });
    }
    if zq.len == 0 {
        return Err(CodecError::EmptyTokens);
    }
    if zq.data.iter().any(|v| !v.is_finite()) {
        return Err(CodecError::Divergence);
    }
    let (frames, _) = params.decode_latents(&zq.data, zq.len);
    Ok(MotionSequence::from_f64(&frames, fps, skeleton.clone())?)
}

/// Frozen tokenizer/detokenizer pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionCodec {
    pub config: CodecConfig,
    pub params: EncoderDecoderParams,
    pub codebook: Codebook,
    pub skeleton: SkeletonSpec,
    pub fps: f32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeOptions {
    /// Linear blend over this many frames around each segment boundary.
    pub crossfade: Option<usize>,
}

impl MotionCodec {
    pub fn downsample(&self) -> usize {
        self.config.downsample
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook.size
    }

    /// Pads to a multiple of `N`, encodes and quantizes; ids only.
    pub fn tokenize(&self, seq: &MotionSequence) -> Result<MotionTokenSeq, CodecError> {
        let padded = seq.padded_to_multiple(self.downsample());
        let z = encode(&self.params, &padded)?;
        let (mut tokens, _) = quantize(&self.codebook, &z)?;
        tokens.source_frames = Some(seq.num_frames());
        Ok(tokens)
    }

    pub fn detokenize(&self, tokens: &MotionTokenSeq) -> Result<MotionSequence, CodecError> {
        let seq = self.decode_ids(&tokens.ids)?;
        Ok(match tokens.source_frames {
            Some(t) if t <= seq.num_frames() => seq.truncated(t),
            _ => seq,
        })
    }

    /// Universal decoding: all segments concatenated and decoded as one
    /// sequence, so the decoder's receptive field spans every junction.
    pub fn detokenize_concat(
        &self,
        segments: &[&MotionTokenSeq],
        options: DetokenizeOptions,
    ) -> Result<MotionSequence, CodecError> {
        let ids: Vec<usize> = segments.iter().flat_map(|s| s.ids.iter().copied()).collect();
        let seq = self.decode_ids(&ids)?;
        match options.crossfade {
            Some(w) if w >= 2 && segments.len() > 1 => {
                let mut boundaries = Vec::new();
                let mut acc = 0;
                for s in &segments[..segments.len() - 1] {
                    acc += s.ids.len() * self.downsample();
                    boundaries.push(acc);
                }
                Ok(crossfade(&seq, &boundaries, w)?)
            }
            _ => Ok(seq),
        }
    }

    /// Baseline for junction comparisons: each segment decoded on its own and
    /// the frames concatenated.
    pub fn detokenize_hard_concat(&self, segments: &[&MotionTokenSeq]) -> Result<MotionSequence, CodecError> {
        let mut out: Option<MotionSequence> = None;
        for s in segments {
            let m = self.decode_ids(&s.ids)?;
            out = Some(match out {
                None => m,
                Some(prev) => prev.concat(&m)?,
            });
        }
        out.ok_or(CodecError::EmptyTokens)
    }

    pub fn decode_ids(&self, ids: &[usize]) -> Result<MotionSequence, CodecError> {
        if ids.is_empty() {
            return Err(CodecError::EmptyTokens);
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= self.codebook.size) {
            return Err(CodecError::Vocabulary { id, size: self.codebook.size });
        }
        let zq = LatentSeq { data: self.codebook.gather(ids), len: ids.len(), dim: self.codebook.dim };
        decode(&self.params, &zq, self.fps, &self.skeleton)
    }

    /// SHA-256 over everything that defines the codec's behaviour.
    pub fn artifact_hash(&self) -> String {
        let mut h = Hasher::new();
        for t in self.params.tensors() {
            h.f64s(t);
        }
        h.f64s(&self.params.norm.mean).f64s(&self.params.norm.std);
        h.f64s(&self.codebook.codes);
        h.bytes(self.skeleton.hash_hex().as_bytes());
        h.u64(self.config.codebook_size as u64).u64(self.config.latent_dim as u64).u64(self.config.downsample as u64);
        h.finish_hex()
    }
}

/// Linear interpolation of every channel across a `width`-frame window
/// centred on each boundary.
pub fn crossfade(seq: &MotionSequence, boundaries: &[usize], width: usize) -> Result<MotionSequence, MotionError> {
    let d = seq.dim();
    let t = seq.num_frames();
    let mut f = seq.to_f64();
    for &b in boundaries {
        let lo = b.saturating_sub(width / 2);
        let hi = (b + width / 2).min(t - 1);
        if hi <= lo + 1 {
            continue;
        }
        let a: Vec<f64> = f[lo * d..(lo + 1) * d].to_vec();
        let z: Vec<f64> = f[hi * d..(hi + 1) * d].to_vec();
        for i in lo + 1..hi {
            let u = (i - lo) as f64 / (hi - lo) as f64;
            for c in 0..d {
                f[i * d + c] = (1.0 - u) * a[c] + u * z[c];
            }
        }
    }
    MotionSequence::from_f64(&f, seq.fps(), seq.skeleton().clone())
}

/// Largest per-joint world displacement over the frame transitions within
/// one frame of `boundary` (the first frame of the second segment).
pub fn junction_jerk(joints: &JointPositions, boundary: usize) -> f64 {
    let lo = boundary.saturating_sub(1).max(1);
    let hi = (boundary + 1).min(joints.num_frames - 1);
    let mut worst = 0.0f64;
    for t in lo..=hi {
        for j in 0..joints.joint_count {
            let a = joints.joint(t - 1, j);
            let b = joints.joint(t, j);
            let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            worst = worst.max(dist);
        }
    }
    worst
}

/// Mean absolute feature error over the frames both sequences share.
pub fn mean_l1(a: &MotionSequence, b: &MotionSequence) -> f64 {
    let t = a.num_frames().min(b.num_frames());
    let d = a.dim();
    let fa = &a.frames()[..t * d];
    let fb = &b.frames()[..t * d];
    fa.iter().zip(fb).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>() / (t * d) as f64
}

