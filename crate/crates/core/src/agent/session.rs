use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::plan::{CallTask, Plan, PlacementTuple};
use super::planner::{make_plan, HistoryEntry, PlannerBackend, PlannerPrompt};
use super::{AgentError, TranslationAgent};
use crate::codec::{DetokenizeOptions, MotionCodec, MotionTokenSeq};
use crate::hash::Hasher;
use crate::motion::MotionSequence;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentSource {
    /// Tokens copied from an earlier motion that this one extends.
    Prefix { motion_id: String },
    /// Tokens produced by call `call` of the turn's plan.
    Call { call: usize, argument: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub source: SegmentSource,
    pub tokens: usize,
    /// Generation hit the token cap before closing the span.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionRecord {
    pub id: String,
    pub turn: usize,
    pub tokens: MotionTokenSeq,
    pub segments: Vec<Segment>,
    /// For a second person: the first person's motion id.
    pub partner: Option<String>,
    pub placement: Option<PlacementTuple>,
    pub motion: MotionSequence,
    /// SHA-256 of the stored frames.
    pub hash: String,
}

impl MotionRecord {
    /// Token offsets where one segment ends and the next begins.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut acc = 0;
        let mut out = Vec::new();
        for s in &self.segments[..self.segments.len().saturating_sub(1)] {
            acc += s.tokens;
            out.push(acc);
        }
        out
    }

    pub fn provenance_consistent(&self) -> bool {
        self.segments.iter().map(|s| s.tokens).sum::<usize>() == self.tokens.len()
    }
}

pub fn motion_hash(m: &MotionSequence) -> String {
    Hasher::new().f32s(m.frames()).finish_hex()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionResult {
    pub motion_ref: String,
    pub text: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub user: String,
    pub plan: Plan,
    pub response: Option<String>,
    pub motion_ids: Vec<String>,
    pub captions: Vec<CaptionResult>,
    pub timestamp: u64,
}

/// Conversation state. Turns and motions are append-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    id: String,
    turns: Vec<Turn>,
    motions: Vec<MotionRecord>,
    created_at: u64,
    updated_at: u64,
}

impl Session {
    pub fn new(id: &str, now: u64) -> Self {
        Self { id: id.into(), turns: Vec::new(), motions: Vec::new(), created_at: now, updated_at: now }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn motions(&self) -> &[MotionRecord] {
        &self.motions
    }

    pub fn created_at(&self) -> u64 {
        self.created_at
    }

    pub fn updated_at(&self) -> u64 {
        self.updated_at
    }

    pub fn motion(&self, id: &str) -> Option<&MotionRecord> {
        self.motions.iter().find(|m| m.id == id)
    }

    pub fn motion_ids(&self) -> Vec<String> {
        self.motions.iter().map(|m| m.id.clone()).collect()
    }

    pub fn history(&self) -> Vec<HistoryEntry> {
        self.turns
            .iter()
            .map(|t| HistoryEntry {
                user: t.user.clone(),
                plan: t.plan.clone(),
                captions: t.captions.clone(),
                motion_ids: t.motion_ids.clone(),
            })
            .collect()
    }

    pub fn prompt(&self, request: &str) -> PlannerPrompt {
        PlannerPrompt::new(request, self.history(), self.motion_ids())
    }

    /// Appends a finished turn and the motions it produced.
    pub fn commit(&mut self, turn: Turn, motions: Vec<MotionRecord>) -> Result<(), AgentError> {
        if turn.index != self.turns.len() {
            return Err(AgentError::Session(format!("turn {} out of order", turn.index)));
        }
        for (i, m) in motions.iter().enumerate() {
            if m.id != motion_id(&self.id, self.motions.len() + i) || !m.provenance_consistent() {
                return Err(AgentError::Session(format!("motion record {} is inconsistent", m.id)));
            }
        }
        self.updated_at = self.updated_at.max(turn.timestamp);
        self.turns.push(turn);
        self.motions.extend(motions);
        Ok(())
    }
}

/// Motion ids are `{session}-m{n}` with `n` counting from 1.
pub fn motion_id(session: &str, index: usize) -> String {
    format!("{session}-m{}", index + 1)
}

/// Seed for one call, a pure function of the turn seed and call position.
pub fn call_seed(seed: u64, turn: usize, call: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((turn as u64) << 20) ^ call as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub motions: Vec<MotionRecord>,
    pub captions: Vec<CaptionResult>,
}

struct Group {
    segments: Vec<Segment>,
    ids: Vec<usize>,
    partner: Option<String>,
    placement: Option<PlacementTuple>,
}

/// Runs every call of `plan` in order against `session` without modifying it.
/// Consecutive generate calls are joined into one token sequence and decoded
/// once; a generate call with `motion_ref` extends that motion's tokens; a
/// generate call with a placement becomes its own motion next to its partner
/// (`motion_ref` if given, else the latest motion).
pub fn execute_plan(
    plan: &Plan,
    session: &Session,
    agent: &mut dyn TranslationAgent,
    codec: &MotionCodec,
    seed: u64,
) -> Result<Execution, AgentError> {
    let turn = session.turns.len();
    let mut staged: Vec<MotionRecord> = Vec::new();
    let mut captions = Vec::new();
    let mut group: Option<Group> = None;

    let lookup = |staged: &[MotionRecord], id: &str| -> Option<MotionRecord> {
        staged.iter().find(|m| m.id == id).or_else(|| session.motion(id)).cloned()
    };
    let flush = |group: &mut Option<Group>, staged: &mut Vec<MotionRecord>| -> Result<(), AgentError> {
        let Some(g) = group.take() else { return Ok(()) };
        let tokens = MotionTokenSeq::new(g.ids);
        let motion = codec.detokenize_concat(&[&tokens], DetokenizeOptions::default())?;
        staged.push(MotionRecord {
            id: motion_id(&session.id, session.motions.len() + staged.len()),
            turn,
            tokens,
            segments: g.segments,
            partner: g.partner,
            placement: g.placement.map(|p| p.normalized()),
            hash: motion_hash(&motion),
            motion,
        });
        Ok(())
    };

    for (ci, call) in plan.calls.iter().enumerate() {
        let s = call_seed(seed, turn, ci);
        match call.task {
            CallTask::Caption => {
                flush(&mut group, &mut staged)?;
                let id = call.motion_ref.as_deref().ok_or_else(|| AgentError::Schema("caption without motion_ref".into()))?;
                let rec = lookup(&staged, id).ok_or_else(|| AgentError::UnknownMotion(id.into()))?;
                let tokens = codec.tokenize(&rec.motion)?;
                let out = agent.caption(&tokens, s)?;
                captions.push(CaptionResult { motion_ref: id.into(), text: out.text, truncated: out.truncated });
            }
            CallTask::Generate => {
                let mut prefix: Vec<usize> = Vec::new();
                if let Some(p) = call.placement {
                    flush(&mut group, &mut staged)?;
                    let partner = match &call.motion_ref {
                        Some(id) => lookup(&staged, id).ok_or_else(|| AgentError::UnknownMotion(id.clone()))?.id,
                        None => staged
                            .last()
                            .or_else(|| session.motions.last())
                            .map(|m| m.id.clone())
                            .ok_or(AgentError::NoMotion)?,
                    };
                    group = Some(Group { segments: Vec::new(), ids: Vec::new(), partner: Some(partner), placement: Some(p) });
                } else if let Some(id) = &call.motion_ref {
                    flush(&mut group, &mut staged)?;
                    let base = lookup(&staged, id).ok_or_else(|| AgentError::UnknownMotion(id.clone()))?;
                    prefix = base.tokens.ids.clone();
                    group = Some(Group {
                        segments: alloc::vec![Segment {
                            source: SegmentSource::Prefix { motion_id: id.clone() },
                            tokens: prefix.len(),
                            truncated: false,
                        }],
                        ids: prefix.clone(),
                        partner: None,
                        placement: None,
                    });
                } else if group.as_ref().is_some_and(|g| g.placement.is_some()) {
                    flush(&mut group, &mut staged)?;
                }
                let out = agent.generate(&call.argument, &prefix, s)?;
                let g = group.get_or_insert_with(|| Group { segments: Vec::new(), ids: Vec::new(), partner: None, placement: None });
                g.segments.push(Segment {
                    source: SegmentSource::Call { call: ci, argument: call.argument.clone() },
                    tokens: out.tokens.len(),
                    truncated: out.truncated,
                });
                g.ids.extend_from_slice(&out.tokens.ids);
                if call.placement.is_some() {
                    flush(&mut group, &mut staged)?;
                }
            }
        }
    }
    flush(&mut group, &mut staged)?;
    Ok(Execution { motions: staged, captions })
}

/// One user turn: plan, execute, optionally ask the planner to answer from
/// caption results, then commit. Nothing is stored if any step fails.
pub fn run_turn(
    session: &mut Session,
    text: &str,
    backend: &mut dyn PlannerBackend,
    agent: &mut dyn TranslationAgent,
    codec: &MotionCodec,
    seed: u64,
    now: u64,
) -> Result<Turn, AgentError> {
    let prompt = session.prompt(text);
    let plan = make_plan(backend, &prompt)?;
    let exec = execute_plan(&plan, session, agent, codec, seed)?;
    let mut response = plan.response.clone();
    if response.is_none() && !exec.captions.is_empty() {
        let mut follow = prompt.clone();
        follow.feedback = Some((plan.clone(), exec.captions.clone()));
        response = make_plan(backend, &follow)?.response;
    }
    let turn = Turn {
        index: session.turns.len(),
        user: text.into(),
        plan,
        response,
        motion_ids: exec.motions.iter().map(|m| m.id.clone()).collect(),
        captions: exec.captions,
        timestamp: now,
    };
    session.commit(turn.clone(), exec.motions)?;
    Ok(turn)
}

/// A turn that revises earlier results; requires at least one stored motion.
pub fn edit_turn(
    session: &mut Session,
    text: &str,
    backend: &mut dyn PlannerBackend,
    agent: &mut dyn TranslationAgent,
    codec: &MotionCodec,
    seed: u64,
    now: u64,
) -> Result<Turn, AgentError> {
    if session.motions.is_empty() {
        return Err(AgentError::NoMotion);
    }
    run_turn(session, text, backend, agent, codec, seed, now)
}
