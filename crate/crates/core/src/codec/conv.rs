//! Time-major 1-D convolution, nearest upsampling and ReLU with reverse passes.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;

/// Weights are laid out `[out][kernel][in]`; activations `[time][channel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        gain: f64,
        r: &mut R,
    ) -> Self {
        let mut weight = vec![0.0; out_ch * kernel * in_ch];
        let std = gain / ((in_ch * kernel) as f64).sqrt();
        rng::fill_normal(r, &mut weight, std);
        Self { in_ch, out_ch, kernel, stride, pad, weight, bias: vec![0.0; out_ch] }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            ..self.clone_shape()
        }
    }

    fn clone_shape(&self) -> Self {
        Self { weight: Vec::new(), bias: Vec::new(), ..*self }
    }

    pub fn out_len(&self, t_in: usize) -> usize {
        (t_in + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn forward(&self, x: &[f64], t_in: usize) -> (Vec<f64>, usize) {
        debug_assert_eq!(x.len(), t_in * self.in_ch);
        let t_out = self.out_len(t_in);
        let mut y = vec![0.0; t_out * self.out_ch];
        let (ci, co, k) = (self.in_ch, self.out_ch, self.kernel);
        for to in 0..t_out {
            let yrow = &mut y[to * co..(to + 1) * co];
            yrow.copy_from_slice(&self.bias);
            for kk in 0..k {
                let ti = (to * self.stride + kk) as isize - self.pad as isize;
                if ti < 0 || ti as usize >= t_in {
                    continue;
                }
                let xrow = &x[ti as usize * ci..(ti as usize + 1) * ci];
                for (o, yv) in yrow.iter_mut().enumerate() {
                    let w = &self.weight[(o * k + kk) * ci..(o * k + kk + 1) * ci];
                    let mut acc = 0.0;
                    for (a, b) in w.iter().zip(xrow) {
                        acc += a * b;
                    }
                    *yv += acc;
                }
            }
        }
        (y, t_out)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], t_in: usize, gy: &[f64], grad: &mut Conv1d) -> Vec<f64> {
        let t_out = self.out_len(t_in);
        let (ci, co, k) = (self.in_ch, self.out_ch, self.kernel);
        let mut gx = vec![0.0; t_in * ci];
        for to in 0..t_out {
            let grow = &gy[to * co..(to + 1) * co];
            for (gb, g) in grad.bias.iter_mut().zip(grow) {
                *gb += g;
            }
            for kk in 0..k {
                let ti = (to * self.stride + kk) as isize - self.pad as isize;
                if ti < 0 || ti as usize >= t_in {
                    continue;
                }
                let ti = ti as usize;
                let xrow = &x[ti * ci..(ti + 1) * ci];
                for (o, &g) in grow.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let off = (o * k + kk) * ci;
                    let w = &self.weight[off..off + ci];
                    let gw = &mut grad.weight[off..off + ci];
                    let gxrow = &mut gx[ti * ci..(ti + 1) * ci];
                    for i in 0..ci {
                        gw[i] += g * xrow[i];
                        gxrow[i] += g * w[i];
                    }
                }
            }
        }
        gx
    }
}

pub fn relu(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Masks `grad` where the ReLU output was zero.
pub fn relu_backward(out: &[f64], grad: &mut [f64]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn upsample2(x: &[f64], t: usize, ch: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * t * ch);
    for i in 0..t {
        let row = &x[i * ch..(i + 1) * ch];
        y.extend_from_slice(row);
        y.extend_from_slice(row);
    }
    y
}

pub fn upsample2_backward(gy: &[f64], t: usize, ch: usize) -> Vec<f64> {
    let mut gx = vec![0.0; t * ch];
    for i in 0..t {
        for c in 0..ch {
            gx[i * ch + c] = gy[2 * i * ch + c] + gy[(2 * i + 1) * ch + c];
        }
    }
    gx
}

pub fn abs_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}
