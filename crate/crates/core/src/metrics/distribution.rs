use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::linalg::{euclidean, matmul, sqrtm_psd};
use crate::rng;

pub const R_PRECISION_POOL: usize = 32;
pub const DEFAULT_S_DIS: usize = 300;
const PSD_CLAMP: f64 = 1e-8;

/// Mean and unbiased covariance of a set of feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianStats {
    pub dim: usize,
    pub count: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl GaussianStats {
    pub fn from_features(feats: &[f64], dim: usize) -> Result<Self, MetricError> {
        let n = feats.len() / dim;
        if n < 2 {
            return Err(MetricError::InsufficientSamples { needed: 2, have: n });
        }
        let mut mean = vec![0.0; dim];
        for row in feats.chunks(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; dim * dim];
        for row in feats.chunks(dim) {
            for i in 0..dim {
                let di = row[i] - mean[i];
                for j in i..dim {
                    cov[i * dim + j] += di * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[i * dim + j] / (n - 1) as f64;
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        Ok(Self { dim, count: n, mean, cov })
    }

    /// Fewer samples than `F + 1` leaves the covariance singular.
    pub fn rank_deficient(&self) -> bool {
        self.count < self.dim + 1
    }
}

/// `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2})`, with the trace of the product
/// root taken as `Tr((Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2})`.
pub fn fid(real: &GaussianStats, gen: &GaussianStats) -> Result<f64, MetricError> {
    if real.dim != gen.dim {
        return Err(MetricError::Dimension { expected: real.dim, got: gen.dim });
    }
    let n = real.dim;
    let mean_term: f64 = real.mean.iter().zip(&gen.mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let s1h = sqrtm_psd(&real.cov, n, PSD_CLAMP).map_err(|e| MetricError::Numerical { min_eigenvalue: e })?;
    let inner = matmul(&matmul(&s1h, &gen.cov, n, n, n), &s1h, n, n, n);
    let root = sqrtm_psd(&inner, n, PSD_CLAMP).map_err(|e| MetricError::Numerical { min_eigenvalue: e })?;
    let trace = |m: &[f64]| (0..n).map(|i| m[i * n + i]).sum::<f64>();
    Ok((mean_term + trace(&real.cov) + trace(&gen.cov) - 2.0 * trace(&root)).max(0.0))
}

/// Mean distance between paired text and motion features.
pub fn mm_dist(text: &[f64], motion: &[f64], dim: usize) -> Result<f64, MetricError> {
    if text.len() != motion.len() {
        return Err(MetricError::CountMismatch(text.len() / dim, motion.len() / dim));
    }
    let n = text.len() / dim;
    if n == 0 {
        return Err(MetricError::InsufficientSamples { needed: 1, have: 0 });
    }
    Ok(text.chunks(dim).zip(motion.chunks(dim)).map(|(a, b)| euclidean(a, b)).sum::<f64>() / n as f64)
}

/// Top-k retrieval accuracy for `k = 1..=tops`: each motion is ranked against
/// its own text and `pool − 1` seeded decoy texts. Exact distance ties are
/// broken uniformly at random, so duplicated captions neither help nor hurt.
pub fn r_precision(
    motion: &[f64],
    text: &[f64],
    dim: usize,
    pool: usize,
    tops: usize,
    seed: u64,
) -> Result<Vec<f64>, MetricError> {
    if text.len() != motion.len() {
        return Err(MetricError::CountMismatch(motion.len() / dim, text.len() / dim));
    }
    let n = motion.len() / dim;
    if n < pool || pool == 0 {
        return Err(MetricError::InsufficientSamples { needed: pool, have: n });
    }
    let mut r = rng::derive(seed, 70);
    let mut hits = vec![0usize; tops];
    let mut others: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let m = &motion[i * dim..(i + 1) * dim];
        let own = euclidean(m, &text[i * dim..(i + 1) * dim]);
        others.clear();
        others.extend((0..n).filter(|&j| j != i));
        let (decoys, _) = others.partial_shuffle(&mut r, pool - 1);
        let (mut closer, mut tied) = (0, 0);
        for &j in decoys.iter() {
            let d = euclidean(m, &text[j * dim..(j + 1) * dim]);
            if d < own {
                closer += 1;
            } else if d == own {
                tied += 1;
            }
        }
        let rank = 1 + closer + if tied > 0 { r.random_range(0..=tied) } else { 0 };
        for (k, h) in hits.iter_mut().enumerate() {
            if rank <= k + 1 {
                *h += 1;
            }
        }
    }
    Ok(hits.iter().map(|&h| h as f64 / n as f64).collect())
}

/// Mean distance over `s_dis` disjoint seeded pairs.
pub fn diversity(feats: &[f64], dim: usize, s_dis: usize, seed: u64) -> Result<f64, MetricError> {
    let n = feats.len() / dim;
    if s_dis == 0 || n < 2 * s_dis {
        return Err(MetricError::InsufficientSamples { needed: 2 * s_dis.max(1), have: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::derive(seed, 71));
    let total: f64 = (0..s_dis)
        .map(|p| {
            let (a, b) = (order[2 * p], order[2 * p + 1]);
            euclidean(&feats[a * dim..(a + 1) * dim], &feats[b * dim..(b + 1) * dim])
        })
        .sum();
    Ok(total / s_dis as f64)
}
