//! Translation agent: a small decoder-only language model whose vocabulary
//! is extended with motion tokens and tuned per task through low-rank
//! adapters while the base stays frozen.

mod generate;
pub mod layers;
mod model;
mod train;
mod vocab;

pub use generate::{generate_caption, generate_motion_tokens, CaptionOutput, GenerationConfig, MotionOutput};
pub use model::{AdapterSet, BaseModelParams, Block, ForwardCache, KvCache, LoraPair, Model, SLOTS};
pub use train::{
    build_text_vocabulary, caption_example, extend_vocabulary, finetune_adapters, generation_example, pretrain_base,
    pretraining_texts, unigram_nll, BaseTrainLog, FinetuneConfig, FinetuneLog, PretrainConfig, TrainingExample,
    GENERIC_TEXT,
};
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};

use alloc::string::String;
use serde::{Deserialize, Serialize};

pub const GENERATION_TEMPLATE: &str = "Generate a motion matching the following input human motion description.";
pub const CAPTIONING_TEMPLATE: &str = "Generate a caption matching the following input human motion token sequence.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Generation = 0,
    Captioning = 1,
}

impl Task {
    pub fn template(self) -> &'static str {
        match self {
            Task::Generation => GENERATION_TEMPLATE,
            Task::Captioning => CAPTIONING_TEMPLATE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Generation => "generation",
            Task::Captioning => "captioning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmConfig {
    pub hidden: usize,
    pub blocks: usize,
    pub heads: usize,
    pub ffn: usize,
}

impl LmConfig {
    pub fn desk() -> Self {
        Self { hidden: 64, blocks: 2, heads: 4, ffn: 256 }
    }

    pub fn validate(&self) -> Result<(), LmError> {
        if self.hidden == 0 || self.blocks == 0 || self.heads == 0 || self.ffn == 0 {
            return Err(LmError::Config("all sizes must be positive".into()));
        }
        if self.hidden % self.heads != 0 || self.hidden % 2 != 0 {
            return Err(LmError::Config("hidden must be even and divisible by heads".into()));
        }
        Ok(())
    }
}

/// Adapter rank, scaling numerator and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    pub dropout: f64,
}

impl LoraConfig {
    /// Laptop-scale ranks, alpha equal to rank.
    pub fn desk(task: Task) -> Self {
        let rank = match task {
            Task::Generation => 16,
            Task::Captioning => 8,
        };
        Self { rank, alpha: rank as f64, dropout: 0.1 }
    }

    /// Full-size ranks 64 / 32 with alpha 32 and dropout 0.1.
    pub fn full(task: Task) -> Self {
        let rank = match task {
            Task::Generation => 64,
            Task::Captioning => 32,
        };
        Self { rank, alpha: 32.0, dropout: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("training data is empty")]
    EmptyData,
    #[error("loss became non-finite")]
    Divergence,
    #[error("frozen base parameters changed during adapter training")]
    FrozenBaseModified,
    #[error("adapters were built for a different base")]
    AdapterMismatch,
    #[error("empty description")]
    EmptyPrompt,
    #[error("model produced an empty caption")]
    EmptyCaption,
    #[error("vocabulary has no motion tokens")]
    NotExtended,
    #[error(transparent)]
    Codec(#[from] crate::codec::CodecError),
}
