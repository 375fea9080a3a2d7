use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::distribution::{diversity, fid, mm_dist, r_precision, GaussianStats, DEFAULT_S_DIS, R_PRECISION_POOL};
use super::features::FeatureExtractor;
use super::text::{bleu, cider_d, rouge_l};
use super::MetricError;
use crate::motion::MotionSequence;
use crate::rng;

/// Anything that turns a caption into a motion for a given seed.
pub trait MotionGenerator {
    fn generate(&mut self, caption: &str, seed: u64) -> Result<MotionSequence, String>;
}

pub trait Captioner {
    fn caption(&mut self, motion: &MotionSequence, seed: u64) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub motion: MotionSequence,
    /// Prompt used for generation.
    pub caption: String,
    /// Every annotation of the motion, for captioning references.
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation over runs.
    pub std: f64,
    /// Half width: `1.96·std/√runs`.
    pub ci95: f64,
    pub per_run: Vec<f64>,
}

impl MetricSummary {
    pub fn from_runs(per_run: Vec<f64>) -> Self {
        let n = per_run.len().max(1) as f64;
        let mean = per_run.iter().sum::<f64>() / n;
        let std = (per_run.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        Self { mean, std, ci95: 1.96 * std / n.sqrt(), per_run }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub note: String,
    pub extractor: String,
    pub repeats: usize,
    pub seed: u64,
    pub items: usize,
    pub s_dis: usize,
    pub warnings: Vec<String>,
    /// Metric name to summary over repeats.
    pub metrics: BTreeMap<String, MetricSummary>,
    /// The same metrics with the ground-truth motions standing in for generations.
    pub ground_truth: BTreeMap<String, f64>,
}

const NOTE: &str = "Features come from a handcrafted extractor; values are not comparable with scores computed by a learned text-motion evaluator.";

struct RunMetrics {
    tops: Vec<f64>,
    fid: f64,
    mm: f64,
    div: f64,
}

fn run_metrics(
    feats: &[f64],
    text: &[f64],
    real: &GaussianStats,
    dim: usize,
    s_dis: usize,
    seed: u64,
) -> Result<RunMetrics, MetricError> {
    let tops = r_precision(feats, text, dim, R_PRECISION_POOL, 3, seed)?;
    let gen = GaussianStats::from_features(feats, dim)?;
    Ok(RunMetrics { tops, fid: fid(real, &gen)?, mm: mm_dist(text, feats, dim)?, div: diversity(feats, dim, s_dis, seed)? })
}

/// Generates a motion for every item `repeats` times with distinct seeds and
/// summarizes R-precision, FID, MM-Dist and Diversity per run.
pub fn evaluate_generation(
    generator: &mut dyn MotionGenerator,
    items: &[EvalItem],
    extractor: &FeatureExtractor,
    repeats: usize,
    seed: u64,
) -> Result<GenerationReport, MetricError> {
    let dim = extractor.dim;
    let n = items.len();
    if n < R_PRECISION_POOL {
        return Err(MetricError::InsufficientSamples { needed: R_PRECISION_POOL, have: n });
    }
    let mut warnings = Vec::new();
    let s_dis = DEFAULT_S_DIS.min(n / 2);
    if s_dis < DEFAULT_S_DIS {
        warnings.push(format!("diversity uses {s_dis} pairs instead of {DEFAULT_S_DIS}: only {n} samples"));
    }
    let real_feats = extractor.motions(items.iter().map(|i| &i.motion));
    let text = extractor.texts(items.iter().map(|i| i.caption.as_str()));
    let real = GaussianStats::from_features(&real_feats, dim)?;
    if real.rank_deficient() {
        warnings.push(format!("{n} samples for {dim}-dimensional features: covariance is rank deficient"));
    }
    let gt = run_metrics(&real_feats, &text, &real, dim, s_dis, seed)?;
    let mut ground_truth = BTreeMap::new();
    for (k, v) in gt.tops.iter().enumerate() {
        ground_truth.insert(format!("r_precision_top{}", k + 1), *v);
    }
    ground_truth.insert("fid".into(), gt.fid);
    ground_truth.insert("mm_dist".into(), gt.mm);
    ground_truth.insert("diversity".into(), gt.div);

    let names = ["r_precision_top1", "r_precision_top2", "r_precision_top3", "fid", "mm_dist", "diversity"];
    let mut runs: Vec<Vec<f64>> = (0..names.len()).map(|_| Vec::with_capacity(repeats)).collect();
    for r in 0..repeats {
        let run_seed = seed.wrapping_add(r as u64);
        let mut feats = Vec::with_capacity(n * dim);
        for (i, item) in items.iter().enumerate() {
            let m = generator
                .generate(&item.caption, run_seed.wrapping_mul(1_000_003).wrapping_add(i as u64))
                .map_err(MetricError::Generation)?;
            feats.extend(extractor.motion(&m));
        }
        let m = run_metrics(&feats, &text, &real, dim, s_dis, run_seed)?;
        for (k, v) in m.tops.iter().enumerate() {
            runs[k].push(*v);
        }
        runs[3].push(m.fid);
        runs[4].push(m.mm);
        runs[5].push(m.div);
    }
    let metrics = names.iter().zip(runs).map(|(k, v)| (k.to_string(), MetricSummary::from_runs(v))).collect();
    Ok(GenerationReport {
        note: NOTE.into(),
        extractor: extractor.stamp(),
        repeats,
        seed,
        items: n,
        s_dis,
        warnings,
        metrics,
        ground_truth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionReport {
    pub bleu1: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

pub fn caption_report<S: AsRef<str>, R: AsRef<str>>(cands: &[S], refs: &[Vec<R>]) -> Result<CaptionReport, MetricError> {
    Ok(CaptionReport {
        bleu1: bleu(cands, refs, 1)?,
        bleu4: bleu(cands, refs, 4)?,
        rouge_l: rouge_l(cands, refs)?,
        cider: cider_d(cands, refs)?,
    })
}

/// Captions every item and scores against its references. Returns the
/// report and the produced captions.
pub fn evaluate_captioning(
    captioner: &mut dyn Captioner,
    items: &[EvalItem],
    seed: u64,
) -> Result<(CaptionReport, Vec<String>), MetricError> {
    let mut cands = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        cands.push(captioner.caption(&item.motion, seed.wrapping_add(i as u64)).map_err(MetricError::Generation)?);
    }
    let refs: Vec<Vec<String>> = items.iter().map(|i| i.references.clone()).collect();
    Ok((caption_report(&cands, &refs)?, cands))
}

/// Baseline candidates: each item gets the first reference of another item
/// under a seeded derangement.
pub fn shuffled_pairs(refs: &[Vec<String>], seed: u64) -> Vec<String> {
    let n = refs.len();
    let mut perm: Vec<usize> = (0..n).collect();
    if n > 1 {
        let mut r = rng::derive(seed, 72);
        loop {
            perm.shuffle(&mut r);
            if perm.iter().enumerate().all(|(i, &p)| i != p) {
                break;
            }
        }
    }
    perm.iter().map(|&p| refs[p].first().cloned().unwrap_or_default()).collect()
}
