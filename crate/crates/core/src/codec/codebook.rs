//! Nearest-code quantizer with EMA code learning and dead-code reset.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::squared_distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub size: usize,
    pub dim: usize,
    /// `K × d` code vectors.
    pub codes: Vec<f64>,
    pub ema_cluster_size: Vec<f64>,
    pub ema_embed_sum: Vec<f64>,
    /// Updates since each code was last assigned.
    pub usage_age: Vec<u32>,
    pub decay: f64,
    pub epsilon: f64,
}

impl Codebook {
    /// Codebook seeded from the given code vectors; EMA sums start at the
    /// codes with unit cluster sizes.
    pub fn from_codes(codes: Vec<f64>, size: usize, dim: usize, decay: f64, epsilon: f64) -> Self {
        assert!(size >= 2 && dim >= 1 && codes.len() == size * dim, "codebook shape");
        Self {
            size,
            dim,
            ema_cluster_size: vec![1.0; size],
            ema_embed_sum: codes.clone(),
            codes,
            usage_age: vec![0; size],
            decay,
            epsilon,
        }
    }

    pub fn code(&self, k: usize) -> &[f64] {
        &self.codes[k * self.dim..(k + 1) * self.dim]
    }

    /// Index of the nearest code to `z`; ties go to the lowest index.
    pub fn nearest(&self, z: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for k in 0..self.size {
            let d = squared_distance(z, self.code(k));
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Quantizes `len × d` latents. Returns ids and the gathered codes.
    pub fn quantize(&self, z: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let ids: Vec<usize> = z.chunks(self.dim).map(|row| self.nearest(row)).collect();
        let zq = self.gather(&ids);
        (ids, zq)
    }

    pub fn gather(&self, ids: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(ids.len() * self.dim);
        for &k in ids {
            out.extend_from_slice(self.code(k));
        }
        out
    }

    /// One EMA step over a batch of latents and their assignments.
    pub fn ema_update(&mut self, z_batch: &[f64], assignments: &[usize]) {
        let (k_total, d) = (self.size, self.dim);
        debug_assert_eq!(z_batch.len(), assignments.len() * d);
        let mut counts = vec![0.0; k_total];
        let mut sums = vec![0.0; k_total * d];
        for (row, &k) in z_batch.chunks(d).zip(assignments) {
            counts[k] += 1.0;
            for c in 0..d {
                sums[k * d + c] += row[c];
            }
        }
        let g = self.decay;
        for k in 0..k_total {
            self.ema_cluster_size[k] = g * self.ema_cluster_size[k] + (1.0 - g) * counts[k];
            for c in 0..d {
                self.ema_embed_sum[k * d + c] = g * self.ema_embed_sum[k * d + c] + (1.0 - g) * sums[k * d + c];
            }
            if counts[k] > 0.0 {
                self.usage_age[k] = 0;
            } else {
                self.usage_age[k] = self.usage_age[k].saturating_add(1);
            }
        }
        let total: f64 = self.ema_cluster_size.iter().sum();
        let denom = total + k_total as f64 * self.epsilon;
        for k in 0..k_total {
            let smoothed = (self.ema_cluster_size[k] + self.epsilon) / denom * total;
            for c in 0..d {
                self.codes[k * d + c] = self.ema_embed_sum[k * d + c] / smoothed;
            }
        }
    }

    /// Re-seeds every code idle for at least `age_threshold` updates from a
    /// uniformly drawn row of `z_batch`. Returns the reset indices.
    pub fn reset_dead<R: Rng + ?Sized>(&mut self, z_batch: &[f64], age_threshold: u32, r: &mut R) -> Vec<usize> {
        let d = self.dim;
        let rows = z_batch.len() / d;
        let mut reset = Vec::new();
        if rows == 0 {
            return reset;
        }
        for k in 0..self.size {
            if self.usage_age[k] >= age_threshold {
                let pick = r.random_range(0..rows);
                let row = &z_batch[pick * d..(pick + 1) * d];
                self.codes[k * d..(k + 1) * d].copy_from_slice(row);
                self.ema_embed_sum[k * d..(k + 1) * d].copy_from_slice(row);
                self.ema_cluster_size[k] = 1.0;
                self.usage_age[k] = 0;
                reset.push(k);
            }
        }
        reset
    }

    pub fn is_finite(&self) -> bool {
        self.codes.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn book() -> Codebook {
        let mut r = rng::seeded(4);
        let mut codes = vec![0.0; 8 * 3];
        rng::fill_normal(&mut r, &mut codes, 1.0);
        Codebook::from_codes(codes, 8, 3, 0.99, 1e-5)
    }

    #[test]
    fn exact_code_maps_to_itself() {
        let cb = book();
        let (ids, zq) = cb.quantize(cb.code(5));
        assert_eq!(ids, [5]);
        assert_eq!(zq, cb.code(5));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut codes = vec![5.0; 8 * 2];
        codes[3 * 2..3 * 2 + 2].copy_from_slice(&[1.0, 0.0]);
        codes[7 * 2..7 * 2 + 2].copy_from_slice(&[-1.0, 0.0]);
        let cb = Codebook::from_codes(codes, 8, 2, 0.99, 1e-5);
        assert_eq!(cb.nearest(&[0.0, 0.0]), 3);
    }

    #[test]
    fn unassigned_code_ages_and_barely_moves() {
        let mut cb = book();
        let before = cb.code(2).to_vec();
        let z = cb.code(0).to_vec();
        cb.ema_update(&z, &[0]);
        assert_eq!(cb.usage_age[2], 1);
        assert_eq!(cb.usage_age[0], 0);
        for (a, b) in cb.code(2).iter().zip(&before) {
            assert!((a - b).abs() < 1e-3 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn two_step_ema_matches_unrolled_recurrence() {
        let mut cb = book();
        let z: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let ids = [1, 1];
        let (g, eps) = (cb.decay, cb.epsilon);
        let mut n = cb.ema_cluster_size.clone();
        let mut s = cb.ema_embed_sum.clone();
        for _ in 0..2 {
            cb.ema_update(&z, &ids);
            for k in 0..8 {
                let cnt = if k == 1 { 2.0 } else { 0.0 };
                n[k] = g * n[k] + (1.0 - g) * cnt;
                for c in 0..3 {
                    let add = if k == 1 { z[c] + z[3 + c] } else { 0.0 };
                    s[k * 3 + c] = g * s[k * 3 + c] + (1.0 - g) * add;
                }
            }
        }
        let tot: f64 = n.iter().sum();
        for k in 0..8 {
            let sm = (n[k] + eps) / (tot + 8.0 * eps) * tot;
            for c in 0..3 {
                assert!((cb.codes[k * 3 + c] - s[k * 3 + c] / sm).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reset_only_touches_idle_codes() {
        let mut cb = book();
        let before = cb.clone();
        let z: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut r = rng::seeded(1);
        assert!(cb.reset_dead(&z, 1, &mut r).is_empty());
        assert_eq!(cb, before);
        cb.usage_age[6] = 3;
        assert_eq!(cb.reset_dead(&z, 1, &mut r), [6]);
        let row = cb.code(6).to_vec();
        assert!(z.chunks(3).any(|c| c == row.as_slice()));
        assert_eq!(cb.usage_age[6], 0);
        assert_eq!(cb.ema_cluster_size[6], 1.0);
    }
}
