use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::plan::{Call, Plan, PlacementTuple, PLAN_SCHEMA_VERSION};
use super::session::CaptionResult;
use super::AgentError;

/// Fixed instruction prompt sent as the system message to chat planners.
pub const INSTRUCTION_PROMPT: &str = "You coordinate a motion agent that can (1) generate a 3D human motion \
from a short English description and (2) caption an existing motion. Break the user's request into an ordered \
list of calls. Each generate call describes one simple action in the form 'a person <does something>'; the \
generated pieces are joined in order into one continuous motion. To continue an existing motion, give the \
first generate call its id in motion_ref. To add a second person, give that generate call a placement \
[theta, x, z]: rotation in radians about the vertical axis and the offset in metres from the first person. \
To describe a motion, use a caption call with its id in motion_ref. When no call is needed, answer in \
response and leave calls empty. Reply with exactly one JSON object and no other text, following schema \
version 1: {\"response\": string|null, \"calls\": [{\"task\": \"generate\"|\"caption\", \"argument\": string, \
\"motion_ref\": string|null, \"placement\": [theta, x, z]|null}]}";

/// Sent after an unparseable or invalid reply; the reason is appended.
pub const REPAIR_PROMPT: &str = "Your reply was not a valid plan. Reply again with exactly one JSON object \
that follows the schema and nothing else. Problem: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub user: String,
    pub plan: Plan,
    pub captions: Vec<CaptionResult>,
    pub motion_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerPrompt {
    pub version: u32,
    pub instruction: String,
    pub request: String,
    pub history: Vec<HistoryEntry>,
    /// Ids of every stored motion, oldest first.
    pub motions: Vec<String>,
    /// Plan already executed for `request` and its caption results, when
    /// the planner is asked for a final answer.
    pub feedback: Option<(Plan, Vec<CaptionResult>)>,
}

impl PlannerPrompt {
    pub fn new(request: &str, history: Vec<HistoryEntry>, motions: Vec<String>) -> Self {
        Self {
            version: PLAN_SCHEMA_VERSION,
            instruction: INSTRUCTION_PROMPT.into(),
            request: request.into(),
            history,
            motions,
            feedback: None,
        }
    }

    pub fn knows(&self, id: &str) -> bool {
        self.motions.iter().any(|m| m == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    RemoteChat,
    RuleBased,
}

pub trait PlannerBackend {
    fn kind(&self) -> BackendKind;
    /// A schema-valid plan for the prompt, or a typed failure.
    fn plan(&mut self, prompt: &PlannerPrompt) -> Result<Plan, AgentError>;
}

/// Asks the backend for a plan and checks it against the session.
pub fn make_plan(backend: &mut dyn PlannerBackend, prompt: &PlannerPrompt) -> Result<Plan, AgentError> {
    let plan = backend.plan(prompt)?;
    plan.validate(&|id| prompt.knows(id))?;
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub messages: Vec<ChatMessage>,
}

/// One chat-completion round trip; returns the assistant's reply text.
pub trait ChatTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, String>;
}

fn captions_message(captions: &[CaptionResult]) -> String {
    let lines: Vec<String> = captions.iter().map(|c| format!("{}: {}", c.motion_ref, c.text)).collect();
    format!("Caption results: {}", lines.join("; "))
}

/// Chat messages for a prompt, history first.
pub fn chat_request(prompt: &PlannerPrompt) -> ChatRequest {
    let mut system = prompt.instruction.clone();
    if !prompt.motions.is_empty() {
        system.push_str("\nMotions in this session: ");
        system.push_str(&prompt.motions.join(", "));
    }
    let mut messages = Vec::new();
    let user = |content: String| ChatMessage { role: Role::User, content };
    let assistant = |content: String| ChatMessage { role: Role::Assistant, content };
    for h in &prompt.history {
        messages.push(user(h.user.clone()));
        messages.push(assistant(h.plan.to_json()));
        if !h.captions.is_empty() {
            messages.push(user(captions_message(&h.captions)));
        }
    }
    messages.push(user(prompt.request.clone()));
    if let Some((plan, captions)) = &prompt.feedback {
        messages.push(assistant(plan.to_json()));
        messages.push(user(format!(
            "{}. Now answer the request in response, with no calls.",
            captions_message(captions)
        )));
    }
    ChatRequest { system, messages }
}

/// Planner behind a chat-completion endpoint.
pub struct RemotePlanner<T> {
    pub transport: T,
}

impl<T: ChatTransport> RemotePlanner<T> {
    pub fn new(transport: T) -> Self {
        Self { transport }
    }

    fn check(prompt: &PlannerPrompt, raw: &str) -> Result<Plan, String> {
        let plan = Plan::from_json(raw)?;
        plan.validate(&|id| prompt.knows(id)).map_err(|e| e.to_string())?;
        if prompt.feedback.is_some() && !plan.calls.is_empty() {
            return Err("the answer to caption results must not contain calls".into());
        }
        Ok(plan)
    }
}

impl<T: ChatTransport> PlannerBackend for RemotePlanner<T> {
    fn kind(&self) -> BackendKind {
        BackendKind::RemoteChat
    }

    fn plan(&mut self, prompt: &PlannerPrompt) -> Result<Plan, AgentError> {
        let mut request = chat_request(prompt);
        let raw = self.transport.complete(&request).map_err(AgentError::Transport)?;
        let reason = match Self::check(prompt, &raw) {
            Ok(plan) => return Ok(plan),
            Err(reason) => reason,
        };
        request.messages.push(ChatMessage { role: Role::Assistant, content: raw });
        request.messages.push(ChatMessage { role: Role::User, content: format!("{REPAIR_PROMPT}{reason}") });
        let raw = self.transport.complete(&request).map_err(AgentError::Transport)?;
        Self::check(prompt, &raw).map_err(|reason| AgentError::PlanFormat { raw, reason })
    }
}

/// Offline planner: splits the request on sequencing words and maps each
/// clause onto the caption phrasing the agent was trained on.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedPlanner;

impl PlannerBackend for RuleBasedPlanner {
    fn kind(&self) -> BackendKind {
        BackendKind::RuleBased
    }

    fn plan(&mut self, prompt: &PlannerPrompt) -> Result<Plan, AgentError> {
        Ok(rule_plan(prompt))
    }
}

const CONNECTIVES: &[&[&str]] = &[
    &["and", "then"],
    &["after", "that"],
    &["followed", "by"],
    &["then"],
    &["afterwards"],
    &["afterward"],
    &["next"],
    &["finally"],
    &["lastly"],
    &["first"],
    &[","],
];

const CAPTION_WORDS: &[&str] = &["describe", "caption", "explain", "describing"];
const EXTEND_WORDS: &[&str] = &["continue", "continues", "continuing", "keep", "keeps", "extend", "resume"];
const SECOND_PERSON: &[&[&str]] = &[
    &["another", "person"],
    &["second", "person"],
    &["other", "person"],
    &["someone", "else"],
    &["a", "friend"],
    &["partner"],
];

const FILLER: &[&str] = &[
    "a", "an", "the", "please", "can", "could", "you", "generate", "create", "make", "show", "give", "me", "motion",
    "animation", "of", "that", "where", "which", "person", "someone", "somebody", "he", "she", "they", "him", "her",
    "them", "human", "man", "woman", "is", "does", "doing", "to", "let", "have", "i", "want", "would", "like",
    "another", "second", "other", "else", "and", "also", "continue", "continues", "continuing", "keep", "keeps",
    "extend", "resume", "friend", "partner", "in",
];

fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '-' || ch == '\'' {
            cur.extend(ch.to_lowercase());
        } else {
            if !cur.is_empty() {
                out.push(core::mem::take(&mut cur));
            }
            if matches!(ch, ',' | ';' | '.' | '!' | '?' | ':') {
                out.push(",".into());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn contains_seq(ws: &[String], seq: &[&str]) -> bool {
    seq.len() <= ws.len() && ws.windows(seq.len()).any(|w| w.iter().zip(seq).all(|(a, b)| a == b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Walk,
    Turn,
    Wave,
    Crouch,
}

fn action_of(word: &str) -> Option<Action> {
    let w = word;
    if w.starts_with("walk") || w.starts_with("stroll") || w.starts_with("jog") || w.starts_with("run") || w == "ran"
    {
        Some(Action::Walk)
    } else if w.starts_with("turn") || w.starts_with("rotat") || w.starts_with("spin") {
        Some(Action::Turn)
    } else if w.starts_with("wav") || w == "wave" {
        Some(Action::Wave)
    } else if w.starts_with("crouch") || w.starts_with("squat") || w.starts_with("kneel") {
        Some(Action::Crouch)
    } else {
        None
    }
}

fn split_clauses(ws: &[String]) -> Vec<Vec<String>> {
    let mut clauses = vec![Vec::new()];
    let mut i = 0;
    'outer: while i < ws.len() {
        for seq in CONNECTIVES {
            if i + seq.len() <= ws.len() && ws[i..i + seq.len()].iter().zip(seq.iter()).all(|(a, b)| a == b) {
                clauses.push(Vec::new());
                i += seq.len();
                continue 'outer;
            }
        }
        // a bare "and" separates only before another action or another person
        let next_person = SECOND_PERSON.iter().any(|s| contains_seq(&ws[i + 1..(i + 1 + s.len()).min(ws.len())], s));
        if ws[i] == "and" && (next_person || ws.get(i + 1).and_then(|w| action_of(w)).is_some()) {
            clauses.push(Vec::new());
            i += 1;
            continue;
        }
        clauses.last_mut().expect("non-empty").push(ws[i].clone());
        i += 1;
    }
    clauses.retain(|c| !c.is_empty());
    clauses
}

/// Canonical description for one clause, or `None` if nothing is left of it.
fn describe(clause: &[String]) -> Option<String> {
    let has = |list: &[&str]| clause.iter().any(|w| list.contains(&w.as_str()));
    let side = if has(&["left"]) {
        Some("left")
    } else if has(&["right"]) {
        Some("right")
    } else {
        None
    };
    match clause.iter().find_map(|w| action_of(w)) {
        Some(Action::Walk) => {
            let pace = if has(&["slowly", "slow", "leisurely"]) {
                " slowly"
            } else if has(&["quickly", "quick", "fast", "briskly", "hurries"])
                || clause.iter().any(|w| w.starts_with("run") || w.starts_with("jog"))
            {
                " quickly"
            } else {
                ""
            };
            Some(format!("a person walks forward{pace}"))
        }
        Some(Action::Turn) => Some(format!("a person turns to the {}", side.unwrap_or("left"))),
        Some(Action::Wave) => Some(format!("a person waves with the {} hand", side.unwrap_or("right"))),
        Some(Action::Crouch) => {
            Some(if has(&["deep", "deeply", "low"]) { "a person crouches down low" } else { "a person crouches down" }.into())
        }
        None => {
            let rest: Vec<&str> =
                clause.iter().map(|w| w.as_str()).filter(|w| *w != "," && !FILLER.contains(w)).collect();
            if rest.is_empty() {
                None
            } else {
                Some(format!("a person {}", rest.join(" ")))
            }
        }
    }
}

/// A full motion id, its short form `m3`, or `motion 3`.
fn resolve(prompt: &PlannerPrompt, word: &str, next: Option<&String>) -> Option<String> {
    if prompt.knows(word) {
        return Some(word.into());
    }
    let n = match word.strip_prefix('m') {
        Some(d) if !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) => d,
        _ if word == "motion" => next.filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))?,
        _ => return None,
    };
    let suffix = format!("-m{n}");
    prompt.motions.iter().find(|id| id.ends_with(&suffix)).cloned()
}

fn rule_plan(prompt: &PlannerPrompt) -> Plan {
    if let Some((_, captions)) = &prompt.feedback {
        let parts: Vec<String> = captions.iter().map(|c| format!("{}: {}", c.motion_ref, c.text)).collect();
        return Plan::answer(&parts.join("; "));
    }
    let ws = words(&prompt.request);
    let mentioned = ws.iter().enumerate().find_map(|(i, w)| resolve(prompt, w, ws.get(i + 1)));
    let latest = mentioned.or_else(|| prompt.motions.last().cloned());
    let is_caption = ws.iter().any(|w| CAPTION_WORDS.contains(&w.as_str()))
        || contains_seq(&ws, &["what", "is"])
        || contains_seq(&ws, &["what", "does"])
        || contains_seq(&ws, &["what's"]);
    if is_caption {
        return match latest {
            Some(id) => Plan { response: None, calls: vec![Call::caption(&id)] },
            None => Plan::answer("There is no motion to describe yet."),
        };
    }
    let extend = ws.iter().any(|w| EXTEND_WORDS.contains(&w.as_str()));
    let mut calls = Vec::new();
    for clause in split_clauses(&ws) {
        let Some(text) = describe(&clause) else { continue };
        let mut call = Call::generate(&text);
        if SECOND_PERSON.iter().any(|s| contains_seq(&clause, s)) {
            call.placement = Some(PlacementTuple::FACING);
        }
        calls.push(call);
    }
    if calls.is_empty() {
        return Plan::answer("Tell me what motion to generate, for example 'walk forward then wave'.");
    }
    if extend {
        if let (Some(id), Some(first)) = (latest, calls.iter_mut().find(|c| c.placement.is_none())) {
            first.motion_ref = Some(id.to_owned());
        }
    }
    Plan { response: None, calls }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(text: &str, motions: &[&str]) -> Plan {
        let p = PlannerPrompt::new(text, Vec::new(), motions.iter().map(|s| s.to_string()).collect());
        make_plan(&mut RuleBasedPlanner, &p).unwrap()
    }

    fn args(p: &Plan) -> Vec<&str> {
        p.calls.iter().map(|c| c.argument.as_str()).collect()
    }

    #[test]
    fn connective_split() {
        assert_eq!(args(&plan("walk forward then wave", &[])), ["a person walks forward", "a person waves with the right hand"]);
        assert_eq!(
            args(&plan("First walk slowly, turn right and then crouch down low.", &[])),
            ["a person walks forward slowly", "a person turns to the right", "a person crouches down low"]
        );
        assert_eq!(args(&plan("a person walks and waves", &[])).len(), 2);
    }

    #[test]
    fn extend_and_caption() {
        let p = plan("make him continue walking after that", &["s-m1"]);
        assert_eq!(p.calls, vec![Call::extend("a person walks forward", "s-m1")]);
        let p = plan("describe s-m1 please", &["s-m1", "s-m2"]);
        assert_eq!(p.calls, vec![Call::caption("s-m1")]);
        assert!(plan("what is it doing?", &[]).calls.is_empty());
        let p = plan("what is the person doing in m1?", &["s-m1", "s-m2"]);
        assert_eq!(p.calls, vec![Call::caption("s-m1")]);
        let p = plan("describe motion 2", &["s-m1", "s-m2", "s-m12"]);
        assert_eq!(p.calls, vec![Call::caption("s-m2")]);
    }

    #[test]
    fn second_person() {
        let p = plan("a person waves and another person waves back", &[]);
        assert_eq!(p.calls.len(), 2);
        assert_eq!(p.calls[1].placement, Some(PlacementTuple::FACING));
    }
}
