use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::cholesky_solve;
use crate::motion::{normalize_text, MotionSequence};
use crate::rng;

pub const EXTRACTOR_VERSION: u32 = 2;
const STATS: usize = 5;
const CONSTANT: f64 = 1e-4;

/// Motion side: per-channel mean, std, min, max and mean absolute frame
/// delta, standardized, then a seeded random projection to `F`. Text side:
/// hashed bag of words mapped to `F` by a ridge fit against the paired
/// motion features. Both outputs are unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub version: u32,
    pub seed: u64,
    pub dim: usize,
    pub feature_dim: usize,
    pub buckets: usize,
    /// `dim × (5·feature_dim)`
    pub motion_proj: Vec<f64>,
    pub stat_mean: Vec<f64>,
    /// Reciprocal std per statistic; zero switches a channel off.
    pub stat_scale: Vec<f64>,
    /// `dim × buckets`
    pub text_proj: Vec<f64>,
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn bucket(word: &str, buckets: usize) -> usize {
    // FNV-1a
    let mut h: u64 = 0xcbf29ce484222325;
    for b in word.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    (h % buckets as u64) as usize
}

/// Pooled statistics of one motion, `5·D` values.
pub fn pooled_stats(m: &MotionSequence) -> Vec<f64> {
    let d = m.dim();
    let t = m.num_frames();
    let f = m.frames();
    let mut out = vec![0.0; STATS * d];
    for c in 0..d {
        let col = (0..t).map(|i| f[i * d + c] as f64);
        let mean = col.clone().sum::<f64>() / t as f64;
        let var = col.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
        let min = col.clone().fold(f64::INFINITY, f64::min);
        let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let delta = if t > 1 {
            (1..t).map(|i| (f[i * d + c] as f64 - f[(i - 1) * d + c] as f64).abs()).sum::<f64>() / (t - 1) as f64
        } else {
            0.0
        };
        out[c * STATS..(c + 1) * STATS].copy_from_slice(&[mean, var.sqrt(), min, max, delta]);
    }
    out
}

impl FeatureExtractor {
    /// Identity standardization and a random text map; useful before fitting.
    pub fn unfitted(seed: u64, dim: usize, feature_dim: usize) -> Self {
        let mut r = rng::derive(seed, 60);
        let width = STATS * feature_dim;
        let mut motion_proj = vec![0.0; dim * width];
        rng::fill_normal(&mut r, &mut motion_proj, 1.0 / (width as f64).sqrt());
        let buckets = 128;
        let mut text_proj = vec![0.0; dim * buckets];
        rng::fill_normal(&mut r, &mut text_proj, 1.0);
        Self {
            version: EXTRACTOR_VERSION,
            seed,
            dim,
            feature_dim,
            buckets,
            motion_proj,
            stat_mean: vec![0.0; width],
            stat_scale: vec![1.0; width],
            text_proj,
        }
    }

    /// Fits the statistic standardization and the text map on paired data.
    pub fn fit<'a>(seed: u64, dim: usize, pairs: impl IntoIterator<Item = (&'a MotionSequence, &'a str)>) -> Self {
        let pairs: Vec<(&MotionSequence, &str)> = pairs.into_iter().collect();
        let feature_dim = pairs.first().map_or(1, |p| p.0.dim());
        let mut ex = Self::unfitted(seed, dim, feature_dim);
        if pairs.is_empty() {
            return ex;
        }
        let width = STATS * feature_dim;
        let stats: Vec<Vec<f64>> = pairs.iter().map(|p| pooled_stats(p.0)).collect();
        let n = stats.len() as f64;
        let mut spread = vec![0.0; width];
        for c in 0..width {
            let mean = stats.iter().map(|s| s[c]).sum::<f64>() / n;
            let var = stats.iter().map(|s| (s[c] - mean).powi(2)).sum::<f64>() / n;
            ex.stat_mean[c] = mean;
            spread[c] = var.sqrt();
        }
        let mut sorted = spread.clone();
        sorted.sort_by(f64::total_cmp);
        let floor = sorted[width / 2] * 0.1;
        // constant channels carry no information; they are switched off
        // rather than letting tiny deviations dominate
        for c in 0..width {
            ex.stat_scale[c] = if spread[c] < CONSTANT { 0.0 } else { 1.0 / spread[c].max(floor) };
        }
        // ridge regression from bag-of-words to motion features
        let hb = ex.buckets;
        let mut gram = vec![0.0; hb * hb];
        let mut rhs = vec![0.0; hb * dim];
        for (m, text) in &pairs {
            let b = ex.bag(text);
            let f = ex.motion(m);
            for i in 0..hb {
                if b[i] == 0.0 {
                    continue;
                }
                for j in 0..hb {
                    gram[i * hb + j] += b[i] * b[j];
                }
                for k in 0..dim {
                    rhs[i * dim + k] += b[i] * f[k];
                }
            }
        }
        for i in 0..hb {
            gram[i * hb + i] += 1e-2;
        }
        if let Some(w) = cholesky_solve(&gram, hb, &rhs, dim) {
            for k in 0..dim {
                for i in 0..hb {
                    ex.text_proj[k * hb + i] = w[i * dim + k];
                }
            }
        }
        ex
    }

    fn bag(&self, text: &str) -> Vec<f64> {
        let mut b = vec![0.0; self.buckets];
        for w in normalize_text(text) {
            b[bucket(&w, self.buckets)] += 1.0;
        }
        b
    }

    pub fn motion(&self, m: &MotionSequence) -> Vec<f64> {
        let s = pooled_stats(m);
        let width = s.len();
        let z: Vec<f64> = s.iter().enumerate().map(|(i, v)| (v - self.stat_mean[i]) * self.stat_scale[i]).collect();
        let mut out: Vec<f64> = (0..self.dim)
            .map(|k| crate::linalg::dot(&self.motion_proj[k * width..(k + 1) * width], &z))
            .collect();
        normalize(&mut out);
        out
    }

    pub fn text(&self, text: &str) -> Vec<f64> {
        let b = self.bag(text);
        let hb = self.buckets;
        let mut out: Vec<f64> = (0..self.dim).map(|k| crate::linalg::dot(&self.text_proj[k * hb..(k + 1) * hb], &b)).collect();
        normalize(&mut out);
        out
    }

    /// `F` values per motion, concatenated.
    pub fn motions<'a>(&self, ms: impl IntoIterator<Item = &'a MotionSequence>) -> Vec<f64> {
        ms.into_iter().flat_map(|m| self.motion(m)).collect()
    }

    pub fn texts<'a>(&self, ts: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        ts.into_iter().flat_map(|t| self.text(t)).collect()
    }

    pub fn stamp(&self) -> String {
        alloc::format!("handcrafted-v{}-seed{}-f{}", self.version, self.seed, self.dim)
    }
}
