//! Row-major sequence kernels (`[time][feature]`) with reverse passes.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;

pub const NORM_EPS: f64 = 1e-6;

/// Dense map `y = W x` with `W` stored `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub out_dim: usize,
    pub in_dim: usize,
    pub w: Vec<f64>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, std: f64, r: &mut R) -> Self {
        let mut w = vec![0.0; out_dim * in_dim];
        rng::fill_normal(r, &mut w, std);
        Self { out_dim, in_dim, w }
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self { out_dim, in_dim, w: vec![0.0; out_dim * in_dim] }
    }
}

/// `x: t × n_in`, `w: n_out × n_in` → `t × n_out`.
pub fn matmul_t(x: &[f64], t: usize, w: &[f64], n_out: usize, n_in: usize) -> Vec<f64> {
    let mut y = vec![0.0; t * n_out];
    for i in 0..t {
        let row = &x[i * n_in..(i + 1) * n_in];
        let out = &mut y[i * n_out..(i + 1) * n_out];
        for (o, slot) in out.iter_mut().enumerate() {
            *slot = dot(&w[o * n_in..(o + 1) * n_in], row);
        }
    }
    y
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Given `gy: t × n_out` returns `gx = gy W` and, when asked, accumulates
/// `gw += gyᵀ x`.
pub fn matmul_t_backward(
    x: &[f64],
    t: usize,
    w: &[f64],
    n_out: usize,
    n_in: usize,
    gy: &[f64],
    gw: Option<&mut [f64]>,
) -> Vec<f64> {
    let mut gx = vec![0.0; t * n_in];
    for i in 0..t {
        let g = &gy[i * n_out..(i + 1) * n_out];
        let gxi = &mut gx[i * n_in..(i + 1) * n_in];
        for (o, &go) in g.iter().enumerate() {
            if go != 0.0 {
                axpy(gxi, go, &w[o * n_in..(o + 1) * n_in]);
            }
        }
    }
    if let Some(gw) = gw {
        for i in 0..t {
            let xi = &x[i * n_in..(i + 1) * n_in];
            for (o, &go) in gy[i * n_out..(i + 1) * n_out].iter().enumerate() {
                if go != 0.0 {
                    axpy(&mut gw[o * n_in..(o + 1) * n_in], go, xi);
                }
            }
        }
    }
    gx
}

/// Returns the normalized output and the per-row inverse RMS.
pub fn rmsnorm(x: &[f64], t: usize, gain: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = gain.len();
    let mut y = vec![0.0; t * h];
    let mut inv = vec![0.0; t];
    for i in 0..t {
        let row = &x[i * h..(i + 1) * h];
        let r = 1.0 / (dot(row, row) / h as f64 + NORM_EPS).sqrt();
        inv[i] = r;
        for c in 0..h {
            y[i * h + c] = gain[c] * row[c] * r;
        }
    }
    (y, inv)
}

pub fn rmsnorm_backward(x: &[f64], t: usize, gain: &[f64], inv: &[f64], gy: &[f64], gg: Option<&mut [f64]>) -> Vec<f64> {
    let h = gain.len();
    let mut gx = vec![0.0; t * h];
    let mut gg = gg;
    for i in 0..t {
        let row = &x[i * h..(i + 1) * h];
        let g = &gy[i * h..(i + 1) * h];
        let r = inv[i];
        let mut s = 0.0;
        for c in 0..h {
            s += g[c] * gain[c] * row[c];
        }
        let coef = s * r * r * r / h as f64;
        for c in 0..h {
            gx[i * h + c] = g[c] * gain[c] * r - row[c] * coef;
        }
        if let Some(gg) = gg.as_deref_mut() {
            for c in 0..h {
                gg[c] += g[c] * row[c] * r;
            }
        }
    }
    gx
}

#[inline]
fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

pub fn silu(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&v| v * sigmoid(v)).collect()
}

pub fn silu_backward(u: &[f64], gy: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(gy)
        .map(|(&v, &g)| {
            let s = sigmoid(v);
            g * s * (1.0 + v * (1.0 - s))
        })
        .collect()
}

/// Sinusoidal position code added to the token embedding at position `pos`.
pub fn add_position(row: &mut [f64], pos: usize) {
    let h = row.len();
    for i in 0..h / 2 {
        let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / h as f64);
        let a = pos as f64 * freq;
        row[2 * i] += a.sin();
        row[2 * i + 1] += a.cos();
    }
}

/// Numerically stable log-softmax of one row.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                a[i] += h;
                let up = f(&a);
                a[i] -= 2.0 * h;
                (up - f(&a)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn rmsnorm_gradient() {
        let x = [0.3, -1.2, 0.5, 0.8, 0.1, -0.4];
        let gain = [1.1, 0.9, -0.5];
        let gy = [0.2, -0.7, 0.4, 1.0, 0.3, -0.2];
        let (_, inv) = rmsnorm(&x, 2, &gain);
        let gx = rmsnorm_backward(&x, 2, &gain, &inv, &gy, None);
        let num = fd(&|x| dot(&rmsnorm(x, 2, &gain).0, &gy), &x);
        for (a, b) in gx.iter().zip(&num) {
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn silu_gradient() {
        let u = [-2.0, -0.3, 0.0, 0.7, 3.0];
        let gy = [1.0; 5];
        let g = silu_backward(&u, &gy);
        let num = fd(&|u| silu(u).iter().sum(), &u);
        for (a, b) in g.iter().zip(&num) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn log_softmax_normalizes() {
        let l = log_softmax(&[1.0, 2.0, 1000.0]);
        let total: f64 = l.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
