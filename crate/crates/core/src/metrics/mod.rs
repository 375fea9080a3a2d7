//! Generation and captioning metrics over a deterministic handcrafted
//! feature extractor.

mod distribution;
mod eval;
mod features;
mod text;

pub use distribution::{diversity, fid, mm_dist, r_precision, GaussianStats, DEFAULT_S_DIS, R_PRECISION_POOL};
pub use eval::{
    caption_report, evaluate_captioning, evaluate_generation, shuffled_pairs, CaptionReport, Captioner, EvalItem,
    GenerationReport, MetricSummary, MotionGenerator,
};
pub use features::{FeatureExtractor, EXTRACTOR_VERSION};
pub use text::{bleu, cider_d, rouge_l, BertScorer};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("feature counts differ: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("need at least {needed} samples, have {have}")]
    InsufficientSamples { needed: usize, have: usize },
    #[error("matrix square root failed: most negative eigenvalue {min_eigenvalue:e}")]
    Numerical { min_eigenvalue: f64 },
    #[error("empty candidate at index {0}")]
    EmptyCandidate(usize),
    #[error("feature width {got} does not match extractor width {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("generation failed: {0}")]
    Generation(String),
}
