//! Three-term VQ objective and its reverse pass.
//!
//! `total = recon + alpha * joint + beta * commit` with
//! `recon` the mean L1 between features, `joint` the mean L1 between world
//! joint positions obtained by forward kinematics of both sequences, and
//! `commit` the mean squared distance between encoder outputs and their
//! (gradient-stopped) codes. Encoder gradients cross the quantizer with the
//! straight-through estimator; the codebook itself receives no gradient.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::codebook::Codebook;
use super::network::EncoderDecoderParams;
use super::CodecError;
use crate::motion::{fk_backward, forward_kinematics_raw, MotionSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqLossReport {
    pub total: f64,
    pub recon: f64,
    pub joint: f64,
    pub commit: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Term weights. `recon` is exposed only so tests can isolate the other terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub recon: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { recon: 1.0, alpha, beta }
    }
}

/// Result of one forward + reverse pass over a single sequence.
#[derive(Debug, Clone)]
pub struct VqStep {
    pub report: VqLossReport,
    pub grads: EncoderDecoderParams,
    pub ids: Vec<usize>,
    /// Encoder outputs, `len × d`.
    pub z: Vec<f64>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn padded_frames(params: &EncoderDecoderParams, seq: &MotionSequence) -> (Vec<f64>, usize, usize) {
    let p = seq.padded_to_multiple(params.downsample);
    (p.to_f64(), p.num_frames(), p.skeleton().joint_count)
}

/// Loss terms for one sequence (padded to a multiple of the downsampling rate).
pub fn vq_loss(
    params: &EncoderDecoderParams,
    cb: &Codebook,
    seq: &MotionSequence,
    alpha: f64,
    beta: f64,
) -> Result<VqLossReport, CodecError> {
    let (frames, t, j) = padded_frames(params, seq);
    Ok(vq_step_raw(params, cb, &frames, t, j, LossWeights::new(alpha, beta), false)?.report)
}

/// Loss and reverse-mode gradients for one sequence.
pub fn backward(
    params: &EncoderDecoderParams,
    cb: &Codebook,
    seq: &MotionSequence,
    alpha: f64,
    beta: f64,
) -> Result<VqStep, CodecError> {
    let (frames, t, j) = padded_frames(params, seq);
    vq_step_raw(params, cb, &frames, t, j, LossWeights::new(alpha, beta), true)
}

/// Core pass over raw `t × D` features with `t` a multiple of the downsampling rate.
pub fn vq_step_raw(
    params: &EncoderDecoderParams,
    cb: &Codebook,
    frames: &[f64],
    t: usize,
    joint_count: usize,
    w: LossWeights,
    with_grads: bool,
) -> Result<VqStep, CodecError> {
    let n = params.downsample;
    if t % n != 0 {
        return Err(CodecError::Length { frames: t, downsample: n });
    }
    let d_feat = params.feature_dim();
    let x = params.norm.apply(frames);
    let (z, len, enc_cache) = params.encode_normalized(&x, t);
    let (ids, zq) = cb.quantize(&z);
    let (y, t_out, dec_cache) = params.decode_normalized(&zq, len);
    debug_assert_eq!(t_out, t);
    let m_hat = params.norm.invert(&y);

    let p = forward_kinematics_raw(frames, t, joint_count);
    let p_hat = forward_kinematics_raw(&m_hat, t, joint_count);

    let n_feat = (t * d_feat) as f64;
    let n_pos = p.positions.len() as f64;
    let n_lat = z.len() as f64;
    let recon: f64 = frames.iter().zip(&m_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n_feat;
    let joint: f64 = p.positions.iter().zip(&p_hat.positions).map(|(a, b)| (a - b).abs()).sum::<f64>() / n_pos;
    let commit: f64 = z.iter().zip(&zq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n_lat;
    let total = w.recon * recon + w.alpha * joint + w.beta * commit;
    let report = VqLossReport { total, recon, joint, commit, alpha: w.alpha, beta: w.beta };
    if !total.is_finite() {
        return Err(CodecError::Divergence);
    }
    let mut grads = params.zeros_like();
    if with_grads {
        // dL/dm_hat: recon term plus joint term pulled back through FK
        let gp: Vec<f64> =
            p_hat.positions.iter().zip(&p.positions).map(|(a, b)| w.alpha * sign(a - b) / n_pos).collect();
        let mut gm = fk_backward(&m_hat, t, joint_count, &gp);
        for (g, (a, b)) in gm.iter_mut().zip(m_hat.iter().zip(frames)) {
            *g += w.recon * sign(a - b) / n_feat;
        }
        // undo de-normalization
        let gy: Vec<f64> = gm.iter().enumerate().map(|(i, g)| g * params.norm.std[i % d_feat]).collect();
        let gzq = params.decoder_backward(&dec_cache, &gy, &mut grads);
        // straight-through: decoder-input gradient lands on z, plus the commitment pull
        let mut gz = vec![0.0; z.len()];
        for i in 0..z.len() {
            gz[i] = gzq[i] + w.beta * 2.0 * (z[i] - zq[i]) / n_lat;
        }
        params.encoder_backward(&enc_cache, &gz, &mut grads);
        if !crate::optim::ParamSet::all_finite(&grads) {
            return Err(CodecError::Divergence);
        }
    }
    Ok(VqStep { report, grads, ids, z })
}
