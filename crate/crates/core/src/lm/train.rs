use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{AdapterSet, BaseModelParams, Model};
use super::vocab::{Vocabulary, BOS, EOS};
use super::{LmConfig, LmError, LoraConfig, Task, CAPTIONING_TEMPLATE, GENERATION_TEMPLATE};
use crate::codec::MotionTokenSeq;
use crate::corpus::{PairedCorpus, Split};
use crate::optim::{Adam, AdamConfig, ParamSet};
use crate::rng;

/// Small general-purpose text mixed into base pre-training.
pub const GENERIC_TEXT: &[&str] = &[
    "the person stands still in the room",
    "someone moves across the floor and stops",
    "a man looks around and then sits down",
    "a woman lifts her arm above her head",
    "the dancer spins on one foot",
    "people walk along the street in the morning",
    "he raises both hands and waves hello",
    "she bends her knees and picks up a box",
    "the child runs forward and jumps",
    "a person steps back slowly",
];

/// Tokens and the positions whose next-token prediction is scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub ids: Vec<usize>,
    /// `target[i]` marks `ids[i]` as a predicted token.
    pub target: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { epochs: 12, batch_size: 8, adam: AdamConfig { lr: 3e-3, ..AdamConfig::default() }, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseTrainLog {
    pub epoch_nll: Vec<f64>,
    pub val_nll: f64,
    pub unigram_val_nll: f64,
    pub base_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub lora: LoraConfig,
    pub seed: u64,
}

impl FinetuneConfig {
    pub fn desk(task: Task) -> Self {
        Self {
            epochs: 20,
            batch_size: 8,
            adam: AdamConfig { lr: 4e-3, ..AdamConfig::default() },
            lora: LoraConfig::desk(task),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneLog {
    pub task: Task,
    pub initial_nll: f64,
    pub epoch_nll: Vec<f64>,
    pub final_nll: f64,
    pub base_hash: String,
}

/// Pre-training text: training-split captions, generic sentences and both
/// prompt templates.
pub fn pretraining_texts(corpus: &PairedCorpus, split: Split) -> Vec<String> {
    let mut texts: Vec<String> = corpus.items_in(split).flat_map(|i| i.annotations.iter().map(|a| a.text.clone())).collect();
    if split == Split::Train {
        texts.extend(GENERIC_TEXT.iter().map(|s| s.to_string()));
        texts.push(GENERATION_TEMPLATE.into());
        texts.push(CAPTIONING_TEMPLATE.into());
    }
    texts
}

pub fn build_text_vocabulary(corpus: &PairedCorpus) -> Vocabulary {
    let mut texts: Vec<&str> = corpus.items.iter().flat_map(|i| i.annotations.iter().map(|a| a.text.as_str())).collect();
    texts.extend(GENERIC_TEXT.iter().copied());
    texts.push(GENERATION_TEMPLATE);
    texts.push(CAPTIONING_TEMPLATE);
    Vocabulary::build(texts)
}

fn text_example(vocab: &Vocabulary, text: &str) -> TrainingExample {
    let mut ids = vec![BOS];
    ids.extend(vocab.encode_text(text));
    ids.push(EOS);
    let mut target = vec![true; ids.len()];
    target[0] = false;
    TrainingExample { ids, target }
}

fn prompt(vocab: &Vocabulary, template: &str) -> Vec<usize> {
    let mut ids = vec![BOS];
    ids.extend(vocab.encode_text(template));
    ids
}

/// Generation prompt ids: template and description, without the opening bracket.
pub(crate) fn generation_prompt(vocab: &Vocabulary, description: &str) -> Vec<usize> {
    let mut ids = prompt(vocab, GENERATION_TEMPLATE);
    ids.extend(vocab.encode_text(description));
    ids
}

/// Captioning prompt ids: template and the bracketed motion.
pub(crate) fn caption_prompt(vocab: &Vocabulary, tokens: &[usize]) -> Vec<usize> {
    let mut ids = prompt(vocab, CAPTIONING_TEMPLATE);
    ids.push(vocab.motion_open());
    ids.extend(tokens.iter().map(|&k| vocab.motion_id(k)));
    ids.push(vocab.motion_close());
    ids
}

/// Prompt, description, then the scored span `<Motion_i>… </Motion>`.
pub fn generation_example(vocab: &Vocabulary, caption: &str, tokens: &MotionTokenSeq) -> TrainingExample {
    let mut ids = generation_prompt(vocab, caption);
    ids.push(vocab.motion_open());
    let start = ids.len();
    ids.extend(tokens.ids.iter().map(|&k| vocab.motion_id(k)));
    ids.push(vocab.motion_close());
    let target = (0..ids.len()).map(|i| i >= start).collect();
    TrainingExample { ids, target }
}

/// Prompt with the bracketed motion, then the scored caption and end token.
pub fn caption_example(vocab: &Vocabulary, tokens: &MotionTokenSeq, caption: &str) -> TrainingExample {
    let mut ids = caption_prompt(vocab, &tokens.ids);
    let start = ids.len();
    ids.extend(vocab.encode_text(caption));
    ids.push(EOS);
    let target = (0..ids.len()).map(|i| i >= start).collect();
    TrainingExample { ids, target }
}

/// Add-one unigram model fitted on `train`, scored per token on `val`
/// (words and end token).
pub fn unigram_nll(vocab: &Vocabulary, train: &[String], val: &[String]) -> f64 {
    let v = vocab.base_size();
    let mut counts = vec![1.0; v];
    let mut total = v as f64;
    for t in train {
        for &id in text_example(vocab, t).ids.iter().skip(1) {
            counts[id] += 1.0;
            total += 1.0;
        }
    }
    let mut nll = 0.0;
    let mut n = 0usize;
    for t in val {
        for &id in text_example(vocab, t).ids.iter().skip(1) {
            nll -= (counts[id] / total).ln();
            n += 1;
        }
    }
    nll / n.max(1) as f64
}

fn mean_nll(model: Model<'_>, examples: &[TrainingExample]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for ex in examples {
        let (nll, count) = model.sequence_nll(&ex.ids, &ex.target, None, None);
        sum += nll * count as f64;
        n += count;
    }
    sum / n.max(1) as f64
}

/// Next-token training of every base parameter on `train` texts.
pub fn pretrain_base(
    vocab: &Vocabulary,
    train: &[String],
    val: &[String],
    lm: &LmConfig,
    config: &PretrainConfig,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<(BaseModelParams, BaseTrainLog), LmError> {
    lm.validate()?;
    if train.is_empty() {
        return Err(LmError::EmptyData);
    }
    let examples: Vec<TrainingExample> = train.iter().map(|t| text_example(vocab, t)).collect();
    let val_examples: Vec<TrainingExample> = val.iter().map(|t| text_example(vocab, t)).collect();
    let mut base = BaseModelParams::init(lm, vocab.base_size(), config.seed);
    let mut adam = Adam::new(config.adam, &base);
    let mut order_rng = rng::derive(config.seed, 50);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_nll = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let mut grads = base.zeros_like();
            for &i in chunk {
                let ex = &examples[i];
                let model = Model::new(&base, None);
                let (nll, _) = model.sequence_nll(&ex.ids, &ex.target, None, Some((Some(&mut grads), None)));
                total += nll;
            }
            grads.scale(1.0 / chunk.len() as f64);
            if !grads.all_finite() {
                return Err(LmError::Divergence);
            }
            adam.step(&mut base, &grads);
        }
        let mean = total / examples.len() as f64;
        if !mean.is_finite() {
            return Err(LmError::Divergence);
        }
        on_epoch(epoch, mean);
        epoch_nll.push(mean);
    }
    let val_nll = mean_nll(Model::new(&base, None), if val_examples.is_empty() { &examples } else { &val_examples });
    let unigram_val_nll = unigram_nll(vocab, train, if val.is_empty() { train } else { val });
    let base_hash = base.base_hash();
    Ok((base, BaseTrainLog { epoch_nll, val_nll, unigram_val_nll, base_hash }))
}

/// Grows a frozen base and its vocabulary by `K` motion tokens and the two brackets.
pub fn extend_vocabulary(
    base: &BaseModelParams,
    vocab: &Vocabulary,
    k: usize,
    seed: u64,
) -> (BaseModelParams, Vocabulary) {
    (base.extend_vocabulary(k + 2, seed), vocab.with_motion_tokens(k))
}

/// Trains a fresh adapter set on `examples` while the base stays frozen.
pub fn finetune_adapters(
    base: &BaseModelParams,
    task: Task,
    examples: &[TrainingExample],
    config: &FinetuneConfig,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<(AdapterSet, FinetuneLog), LmError> {
    if examples.is_empty() {
        return Err(LmError::EmptyData);
    }
    if base.vocab_size == base.base_vocab {
        return Err(LmError::NotExtended);
    }
    let frozen = base.base_hash();
    let lora = config.lora;
    let mut adapters = AdapterSet::init(base, task, lora.rank, lora.alpha, lora.dropout, config.seed);
    let initial_nll = mean_nll(Model::new(base, Some(&adapters)), examples);
    let mut adam = Adam::new(config.adam, &adapters);
    let mut order_rng = rng::derive(config.seed, 51 + task as u64);
    let mut drop_rng = rng::derive(config.seed, 53 + task as u64);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_nll = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let mut grads = adapters.zeros_like();
            for &i in chunk {
                let ex = &examples[i];
                let model = Model::new(base, Some(&adapters));
                let (nll, _) = model.sequence_nll(&ex.ids, &ex.target, Some(&mut drop_rng), Some((None, Some(&mut grads))));
                total += nll;
            }
            grads.scale(1.0 / chunk.len() as f64);
            if !grads.all_finite() {
                return Err(LmError::Divergence);
            }
            adam.step(&mut adapters, &grads);
        }
        if base.base_hash() != frozen {
            return Err(LmError::FrozenBaseModified);
        }
        let mean = total / examples.len() as f64;
        if !mean.is_finite() {
            return Err(LmError::Divergence);
        }
        on_epoch(epoch, mean);
        epoch_nll.push(mean);
    }
    let final_nll = mean_nll(Model::new(base, Some(&adapters)), examples);
    Ok((adapters, FinetuneLog { task, initial_nll, epoch_nll, final_nll, base_hash: frozen }))
}
