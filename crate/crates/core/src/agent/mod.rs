//! Plan-driven orchestration of the translation agent.
//!
//! A planner backend turns each user turn into a [`Plan`] of generate and
//! caption calls. Generate calls are joined at the token level and decoded
//! once; results are appended to a [`Session`] with per-call provenance.

mod placement;
mod plan;
mod planner;
mod session;

use alloc::string::String;
use thiserror::Error;

pub use placement::{place_second_person, rotate_about_vertical, translate, ScenePair};
pub use plan::{Call, CallTask, PlacementTuple, Plan, PLAN_SCHEMA_VERSION};
pub use planner::{
    chat_request, make_plan, BackendKind, ChatMessage, ChatRequest, ChatTransport, HistoryEntry, PlannerBackend,
    PlannerPrompt, RemotePlanner, Role, RuleBasedPlanner, INSTRUCTION_PROMPT, REPAIR_PROMPT,
};
pub use session::{
    call_seed, edit_turn, execute_plan, motion_hash, motion_id, run_turn, CaptionResult, Execution, MotionRecord,
    Segment, SegmentSource, Session, Turn,
};

use crate::codec::{CodecError, MotionTokenSeq};
use crate::lm::{generate_caption, generate_motion_tokens, CaptionOutput, GenerationConfig, LmError, Model, MotionOutput, Vocabulary};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("planner reply is not a valid plan ({reason}): {raw}")]
    PlanFormat { raw: String, reason: String },
    #[error("planner transport failed: {0}")]
    Transport(String),
    #[error("invalid plan: {0}")]
    Schema(String),
    #[error("unknown motion '{0}'")]
    UnknownMotion(String),
    #[error("the session has no motion yet")]
    NoMotion,
    #[error("both motions must share a skeleton")]
    SkeletonMismatch,
    #[error("session: {0}")]
    Session(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Lm(#[from] LmError),
}

/// Text to motion tokens and back.
pub trait TranslationAgent {
    fn generate(&mut self, description: &str, prefix: &[usize], seed: u64) -> Result<MotionOutput, AgentError>;
    fn caption(&mut self, tokens: &MotionTokenSeq, seed: u64) -> Result<CaptionOutput, AgentError>;
}

/// The adapter-tuned language model pair.
#[derive(Clone, Copy)]
pub struct LmAgent<'a> {
    pub vocab: &'a Vocabulary,
    pub generator: Model<'a>,
    pub captioner: Model<'a>,
    pub generation: &'a GenerationConfig,
}

impl TranslationAgent for LmAgent<'_> {
    fn generate(&mut self, description: &str, prefix: &[usize], seed: u64) -> Result<MotionOutput, AgentError> {
        let cfg = GenerationConfig { seed, ..self.generation.clone() };
        Ok(generate_motion_tokens(self.generator, self.vocab, description, prefix, &cfg)?)
    }

    fn caption(&mut self, tokens: &MotionTokenSeq, seed: u64) -> Result<CaptionOutput, AgentError> {
        let cfg = GenerationConfig { seed, ..self.generation.clone() };
        Ok(generate_caption(self.captioner, self.vocab, tokens, &cfg)?)
    }
}
