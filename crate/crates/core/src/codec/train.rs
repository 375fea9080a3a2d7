use alloc::boxed::Box;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{mean_l1, vq_step_raw, Codebook, CodecConfig, CodecError, EncoderDecoderParams, FeatureNorm, LossWeights};
use super::MotionCodec;
use crate::corpus::{PairedCorpus, Split};
use crate::motion::MotionSequence;
use crate::optim::{Adam, AdamConfig, ParamSet};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainVqConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Stop once the validation L1 falls below this.
    pub target_val_l1: Option<f64>,
    pub seed: u64,
}

impl Default for TrainVqConfig {
    fn default() -> Self {
        Self {
            max_epochs: 60,
            batch_size: 8,
            adam: AdamConfig { lr: 2e-3, ..AdamConfig::default() },
            target_val_l1: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_total: f64,
    pub mean_recon: f64,
    pub mean_joint: f64,
    pub mean_commit: f64,
    pub val_l1: f64,
    pub resets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Target,
    MaxEpochs,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Validation L1 of the initialised, untrained codec.
    pub baseline_val_l1: f64,
    pub epochs: Vec<EpochLog>,
    pub stop: StopReason,
    pub updates: u64,
    /// Fraction of codes with usage age below the reset threshold.
    pub live_fraction_by_age: f64,
    /// Fraction of codes chosen at least once when tokenizing the train split.
    pub live_fraction_used: f64,
}

impl TrainLog {
    pub fn final_val_l1(&self) -> f64 {
        self.epochs.last().map_or(self.baseline_val_l1, |e| e.val_l1)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("codec training aborted: {error}")]
pub struct TrainVqError {
    pub error: CodecError,
    /// Codec as of the last completed epoch.
    pub last_good: Option<Box<MotionCodec>>,
    pub log: Option<TrainLog>,
}

fn fail(error: CodecError) -> TrainVqError {
    TrainVqError { error, last_good: None, log: None }
}

fn add_into(acc: &mut EncoderDecoderParams, g: &EncoderDecoderParams) {
    for (a, b) in acc.tensors_mut().into_iter().zip(g.tensors()) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Mean per-item L1 between each motion and its reconstruction.
pub fn reconstruction_l1(codec: &MotionCodec, motions: &[&MotionSequence]) -> Result<f64, CodecError> {
    let mut total = 0.0;
    for m in motions {
        let rec = codec.detokenize(&codec.tokenize(m)?)?;
        total += mean_l1(m, &rec);
    }
    Ok(total / motions.len().max(1) as f64)
}

/// Fraction of codebook entries chosen at least once across `motions`.
pub fn codebook_usage(codec: &MotionCodec, motions: &[&MotionSequence]) -> Result<f64, CodecError> {
    let mut used = alloc::vec![false; codec.codebook.size];
    for m in motions {
        for id in codec.tokenize(m)?.ids {
            used[id] = true;
        }
    }
    Ok(used.iter().filter(|u| **u).count() as f64 / used.len() as f64)
}

/// Minibatch Adam on the three-term loss with EMA codebook updates and
/// dead-code resets. `on_epoch` returning false stops training early.
pub fn train_vq(
    corpus: &PairedCorpus,
    codec_config: &CodecConfig,
    config: &TrainVqConfig,
    on_epoch: &mut dyn FnMut(&EpochLog) -> bool,
) -> Result<(MotionCodec, TrainLog), TrainVqError> {
    codec_config.validate().map_err(fail)?;
    let train: Vec<&MotionSequence> = corpus.items_in(Split::Train).map(|i| &i.motion).collect();
    if train.is_empty() {
        return Err(fail(CodecError::EmptyTrainSplit));
    }
    let mut val: Vec<&MotionSequence> = corpus.items_in(Split::Val).map(|i| &i.motion).collect();
    if val.is_empty() {
        val = train.clone();
    }
    let skeleton = train[0].skeleton().clone();
    let fps = train[0].fps();
    if codec_config.feature_dim != skeleton.feature_dim() {
        return Err(fail(CodecError::Shape { expected: skeleton.feature_dim(), got: codec_config.feature_dim }));
    }
    let n = codec_config.downsample;
    let padded: Vec<(Vec<f64>, usize)> = train
        .iter()
        .map(|m| {
            let p = m.padded_to_multiple(n);
            (p.to_f64(), p.num_frames())
        })
        .collect();

    let mut params = EncoderDecoderParams::init(codec_config, config.seed);
    params.norm = FeatureNorm::fit(codec_config.feature_dim, train.iter().map(|m| m.frames()));
    let codebook = init_codebook(&params, &padded, codec_config, config.seed);
    let mut codec = MotionCodec { config: codec_config.clone(), params, codebook, skeleton: skeleton.clone(), fps };
    let baseline_val_l1 = reconstruction_l1(&codec, &val).map_err(fail)?;

    let mut adam = Adam::new(config.adam, &codec.params);
    let mut order_rng = rng::derive(config.seed, 20);
    let mut reset_rng = rng::derive(config.seed, 21);
    let weights = LossWeights::new(codec_config.alpha, codec_config.beta);
    let joints = skeleton.joint_count;
    let mut log = TrainLog {
        baseline_val_l1,
        epochs: Vec::new(),
        stop: StopReason::MaxEpochs,
        updates: 0,
        live_fraction_by_age: 0.0,
        live_fraction_used: 0.0,
    };
    let mut last_good = codec.clone();
    let mut order: Vec<usize> = (0..padded.len()).collect();
    let batch = config.batch_size.max(1);

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut order_rng);
        let mut sums = [0.0f64; 4];
        let mut resets = 0;
        for chunk in order.chunks(batch) {
            let mut grads = codec.params.zeros_like();
            let mut z_batch = Vec::new();
            let mut ids = Vec::new();
            for &i in chunk {
                let (frames, t) = &padded[i];
                let step = vq_step_raw(&codec.params, &codec.codebook, frames, *t, joints, weights, true);
                let step = match step {
                    Ok(s) => s,
                    Err(error) => return Err(diverged(error, last_good, log)),
                };
                add_into(&mut grads, &step.grads);
                sums[0] += step.report.total;
                sums[1] += step.report.recon;
                sums[2] += step.report.joint;
                sums[3] += step.report.commit;
                z_batch.extend_from_slice(&step.z);
                ids.extend_from_slice(&step.ids);
            }
            grads.scale(1.0 / chunk.len() as f64);
            if !grads.all_finite() {
                return Err(diverged(CodecError::Divergence, last_good, log));
            }
            adam.step(&mut codec.params, &grads);
            codec.codebook.ema_update(&z_batch, &ids);
            resets += codec.codebook.reset_dead(&z_batch, codec_config.reset_age, &mut reset_rng).len();
            log.updates += 1;
            if !codec.params.all_finite() || !codec.codebook.is_finite() {
                return Err(diverged(CodecError::Divergence, last_good, log));
            }
        }
        let val_l1 = match reconstruction_l1(&codec, &val) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => return Err(diverged(CodecError::Divergence, last_good, log)),
            Err(e) => return Err(diverged(e, last_good, log)),
        };
        let count = padded.len() as f64;
        let entry = EpochLog {
            epoch,
            mean_total: sums[0] / count,
            mean_recon: sums[1] / count,
            mean_joint: sums[2] / count,
            mean_commit: sums[3] / count,
            val_l1,
            resets,
        };
        let keep_going = on_epoch(&entry);
        log.epochs.push(entry);
        last_good = codec.clone();
        if config.target_val_l1.is_some_and(|t| val_l1 <= t) {
            log.stop = StopReason::Target;
            break;
        }
        if !keep_going {
            log.stop = StopReason::Cancelled;
            break;
        }
    }
    let live = codec.codebook.usage_age.iter().filter(|&&a| a < codec_config.reset_age).count();
    log.live_fraction_by_age = live as f64 / codec.codebook.size as f64;
    log.live_fraction_used = codebook_usage(&codec, &train).map_err(fail)?;
    Ok((codec, log))
}

fn diverged(error: CodecError, last_good: MotionCodec, log: TrainLog) -> TrainVqError {
    TrainVqError { error, last_good: Some(Box::new(last_good)), log: Some(log) }
}

/// Codes start as distinct encoder outputs drawn from the training set.
fn init_codebook(
    params: &EncoderDecoderParams,
    padded: &[(Vec<f64>, usize)],
    config: &CodecConfig,
    seed: u64,
) -> Codebook {
    let d = config.latent_dim;
    let mut rows = Vec::new();
    for (frames, t) in padded {
        rows.extend(params.encode_frames(frames, *t).0);
    }
    let count = rows.len() / d;
    let mut r = rng::derive(seed, 22);
    let mut picks: Vec<usize> = (0..count).collect();
    picks.shuffle(&mut r);
    let mut codes = Vec::with_capacity(config.codebook_size * d);
    for k in 0..config.codebook_size {
        let row = if k < count { picks[k] } else { r.random_range(0..count) };
        codes.extend_from_slice(&rows[row * d..(row + 1) * d]);
    }
    Codebook::from_codes(codes, config.codebook_size, d, config.decay, config.epsilon)
}
