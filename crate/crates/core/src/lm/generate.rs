use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::train::{caption_prompt, generation_prompt};
use super::vocab::{Vocabulary, EOS};
use super::LmError;
use crate::codec::MotionTokenSeq;
use crate::rng::{self, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub max_new_tokens: usize,
    /// Zero selects greedy decoding.
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { max_new_tokens: 48, temperature: 0.0, top_k: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionOutput {
    pub tokens: MotionTokenSeq,
    /// Hit the token cap before `</Motion>`; the span was closed by force.
    pub truncated: bool,
    /// Every id sampled inside the span, closing bracket included.
    pub span: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionOutput {
    pub text: String,
    pub truncated: bool,
    pub ids: Vec<usize>,
}

/// Picks an id among those with `allowed(id)`; greedy ties go to the lowest id.
fn pick(logits: &[f64], allowed: &dyn Fn(usize) -> bool, cfg: &GenerationConfig, r: &mut SeededRng) -> usize {
    let mut cand: Vec<(usize, f64)> = logits.iter().copied().enumerate().filter(|(i, _)| allowed(*i)).collect();
    debug_assert!(!cand.is_empty());
    if cfg.temperature <= 0.0 {
        let mut best = cand[0];
        for &c in &cand[1..] {
            if c.1 > best.1 {
                best = c;
            }
        }
        return best.0;
    }
    if let Some(k) = cfg.top_k.filter(|&k| k > 0 && k < cand.len()) {
        cand.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        cand.truncate(k);
        cand.sort_by_key(|c| c.0);
    }
    let m = cand.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = cand.iter().map(|c| ((c.1 - m) / cfg.temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = r.random::<f64>() * total;
    for (c, w) in cand.iter().zip(&weights) {
        if u < *w {
            return c.0;
        }
        u -= w;
    }
    cand[cand.len() - 1].0
}

/// Text to motion tokens. After the prompt `<Motion>` is forced; inside the
/// span only motion tokens and `</Motion>` can be produced, and the closing
/// bracket is unavailable until one motion token exists. `prefix` tokens are
/// fed as already generated and are not part of the output.
pub fn generate_motion_tokens(
    model: Model<'_>,
    vocab: &Vocabulary,
    description: &str,
    prefix: &[usize],
    cfg: &GenerationConfig,
) -> Result<MotionOutput, LmError> {
    if vocab.motion_count() == 0 {
        return Err(LmError::NotExtended);
    }
    if description.trim().is_empty() {
        return Err(LmError::EmptyPrompt);
    }
    let k = vocab.motion_count();
    if let Some(&bad) = prefix.iter().find(|&&p| p >= k) {
        return Err(crate::codec::CodecError::Vocabulary { id: bad, size: k }.into());
    }
    let mut r = rng::seeded(cfg.seed);
    let mut cache = model.start_cache();
    let mut logits = Vec::new();
    let mut feed: Vec<usize> = generation_prompt(vocab, description);
    feed.push(vocab.motion_open());
    feed.extend(prefix.iter().map(|&p| vocab.motion_id(p)));
    for id in feed {
        logits = model.step(&mut cache, id);
    }
    let (lo, hi, close) = (vocab.motion_id(0), vocab.motion_open(), vocab.motion_close());
    let mut ids = Vec::new();
    let mut span = Vec::new();
    let cap = cfg.max_new_tokens.max(1);
    let mut truncated = true;
    while ids.len() < cap {
        let allow_close = !ids.is_empty() || !prefix.is_empty();
        let next = pick(&logits, &|i| (lo..hi).contains(&i) || (allow_close && i == close), cfg, &mut r);
        span.push(next);
        if next == close {
            truncated = false;
            break;
        }
        ids.push(next - lo);
        logits = model.step(&mut cache, next);
    }
    if truncated {
        span.push(close);
    }
    Ok(MotionOutput { tokens: MotionTokenSeq::new(ids), truncated, span })
}

/// Motion tokens to text: prompt with the bracketed motion, then words until
/// the end token or the cap.
pub fn generate_caption(
    model: Model<'_>,
    vocab: &Vocabulary,
    tokens: &MotionTokenSeq,
    cfg: &GenerationConfig,
) -> Result<CaptionOutput, LmError> {
    if vocab.motion_count() == 0 {
        return Err(LmError::NotExtended);
    }
    tokens.validate(vocab.motion_count())?;
    let mut r = rng::seeded(cfg.seed);
    let mut cache = model.start_cache();
    let mut logits = Vec::new();
    for id in caption_prompt(vocab, &tokens.ids) {
        logits = model.step(&mut cache, id);
    }
    let b = vocab.base_size();
    let mut ids = Vec::new();
    let mut truncated = true;
    while ids.len() < cfg.max_new_tokens.max(1) {
        let next = pick(&logits, &|i| i == EOS || (i < b && !Vocabulary::is_special(i)), cfg, &mut r);
        if next == EOS {
            truncated = false;
            break;
        }
        ids.push(next);
        logits = model.step(&mut cache, next);
    }
    if ids.is_empty() {
        return Err(LmError::EmptyCaption);
    }
    Ok(CaptionOutput { text: vocab.decode_text(&ids), truncated, ids })
}
