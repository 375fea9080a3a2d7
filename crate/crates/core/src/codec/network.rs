//! Temporal conv encoder `E` and mirror decoder `D`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::conv::{relu, relu_backward, upsample2, upsample2_backward, Conv1d};
use super::CodecConfig;
use crate::optim::ParamSet;
use crate::rng;

/// Per-channel standardization applied before the encoder and undone after the decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity(d: usize) -> Self {
        Self { mean: vec![0.0; d], std: vec![1.0; d] }
    }

    /// Statistics over all frames of `sequences`, with a floor on the spread.
    pub fn fit<'a>(d: usize, sequences: impl Iterator<Item = &'a [f32]>) -> Self {
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        let mut n = 0usize;
        for frames in sequences {
            for row in frames.chunks(d) {
                for c in 0..d {
                    let v = row[c] as f64;
                    sum[c] += v;
                    sq[c] += v * v;
                }
                n += 1;
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq.iter().zip(&mean).map(|(s, m)| (s / n - m * m).max(0.0).sqrt().max(1e-3)).collect();
        Self { mean, std }
    }

    pub fn apply(&self, frames: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        frames.iter().enumerate().map(|(i, v)| (v - self.mean[i % d]) / self.std[i % d]).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        y.iter().enumerate().map(|(i, v)| v * self.std[i % d] + self.mean[i % d]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderDecoderParams {
    pub encoder: Vec<Conv1d>,
    pub decoder: Vec<Conv1d>,
    /// Not trained; fitted on the training split.
    pub norm: FeatureNorm,
    pub downsample: usize,
}

/// Activations kept for the reverse pass. `acts[i]` is the input of layer `i`.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    acts: Vec<(Vec<f64>, usize)>,
}

#[derive(Debug, Clone)]
pub struct DecoderCache {
    acts: Vec<(Vec<f64>, usize)>,
    /// Output of each hidden ReLU (pre-upsample), by decoder layer.
    relu_out: Vec<Vec<f64>>,
}

impl EncoderDecoderParams {
    pub fn init(config: &CodecConfig, seed: u64) -> Self {
        let mut r = rng::derive(seed, 10);
        let levels = config.levels();
        let (d_in, w, d) = (config.feature_dim, config.width, config.latent_dim);
        let gain = core::f64::consts::SQRT_2;
        let mut encoder = vec![Conv1d::new(d_in, w, 3, 1, 1, gain, &mut r)];
        for _ in 0..levels {
            encoder.push(Conv1d::new(w, w, 4, 2, 1, gain, &mut r));
        }
        encoder.push(Conv1d::new(w, d, 3, 1, 1, 1.0, &mut r));
        let mut decoder = vec![Conv1d::new(d, w, 3, 1, 1, gain, &mut r)];
        for _ in 0..levels {
            decoder.push(Conv1d::new(w, w, 3, 1, 1, gain, &mut r));
        }
        decoder.push(Conv1d::new(w, d_in, 3, 1, 1, 0.5, &mut r));
        Self { encoder, decoder, norm: FeatureNorm::identity(d_in), downsample: config.downsample }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.iter().map(Conv1d::zeros_like).collect(),
            decoder: self.decoder.iter().map(Conv1d::zeros_like).collect(),
            norm: self.norm.clone(),
            downsample: self.downsample,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().map(|c| c.out_ch).unwrap_or(0)
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder[0].in_ch
    }

    /// Encoder on normalized features; returns latents `(T/N) × d`.
    pub fn encode_normalized(&self, x: &[f64], t: usize) -> (Vec<f64>, usize, EncoderCache) {
        let mut acts = Vec::with_capacity(self.encoder.len());
        let mut cur = (x.to_vec(), t);
        let last = self.encoder.len() - 1;
        for (i, layer) in self.encoder.iter().enumerate() {
            let (mut y, ty) = layer.forward(&cur.0, cur.1);
            if i < last {
                relu(&mut y);
            }
            acts.push(core::mem::replace(&mut cur, (y, ty)));
        }
        (cur.0, cur.1, EncoderCache { acts })
    }

    /// Decoder producing normalized features `(N·L) × D`.
    pub fn decode_normalized(&self, z: &[f64], len: usize) -> (Vec<f64>, usize, DecoderCache) {
        let mut acts = Vec::with_capacity(self.decoder.len());
        let mut relu_out = Vec::with_capacity(self.decoder.len());
        let last = self.decoder.len() - 1;
        let mut cur = (z.to_vec(), len);
        for (i, layer) in self.decoder.iter().enumerate() {
            let input = if i >= 1 && i < last {
                // upsampling blocks
                (upsample2(&cur.0, cur.1, layer.in_ch), cur.1 * 2)
            } else {
                cur.clone()
            };
            let (mut y, ty) = layer.forward(&input.0, input.1);
            if i < last {
                relu(&mut y);
                relu_out.push(y.clone());
            } else {
                relu_out.push(Vec::new());
            }
            acts.push(input);
            cur = (y, ty);
        }
        (cur.0, cur.1, DecoderCache { acts, relu_out })
    }

    /// Raw features → latents, including normalization.
    pub fn encode_frames(&self, frames: &[f64], t: usize) -> (Vec<f64>, usize) {
        let x = self.norm.apply(frames);
        let (z, n, _) = self.encode_normalized(&x, t);
        (z, n)
    }

    /// Latents → raw features, including de-normalization.
    pub fn decode_latents(&self, z: &[f64], len: usize) -> (Vec<f64>, usize) {
        let (y, t, _) = self.decode_normalized(z, len);
        (self.norm.invert(&y), t)
    }

    /// Reverse pass through the decoder; returns `dL/dz_q`.
    pub fn decoder_backward(&self, cache: &DecoderCache, gy: &[f64], grads: &mut Self) -> Vec<f64> {
        let last = self.decoder.len() - 1;
        let mut g = gy.to_vec();
        for i in (0..self.decoder.len()).rev() {
            if i < last {
                relu_backward(&cache.relu_out[i], &mut g);
            }
            let (x, tx) = &cache.acts[i];
            let gx = self.decoder[i].backward(x, *tx, &g, &mut grads.decoder[i]);
            g = if i >= 1 && i < last { upsample2_backward(&gx, tx / 2, self.decoder[i].in_ch) } else { gx };
        }
        g
    }

    /// Reverse pass through the encoder given `dL/dz`.
    pub fn encoder_backward(&self, cache: &EncoderCache, gz: &[f64], grads: &mut Self) {
        let mut g = gz.to_vec();
        for i in (0..self.encoder.len()).rev() {
            let (x, tx) = &cache.acts[i];
            let gx = self.encoder[i].backward(x, *tx, &g, &mut grads.encoder[i]);
            if i > 0 {
                // x is the ReLU output of layer i-1
                let mut gx = gx;
                relu_backward(x, &mut gx);
                g = gx;
            }
        }
    }
}

impl ParamSet for EncoderDecoderParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for c in self.encoder.iter().chain(&self.decoder) {
            v.push(&c.weight);
            v.push(&c.bias);
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for c in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            v.push(&mut c.weight);
            v.push(&mut c.bias);
        }
        v
    }
}
