use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use serde::{Deserialize, Serialize};

use super::AgentError;

/// Version of the plan JSON schema announced in the planner instruction.
pub const PLAN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallTask {
    Generate,
    Caption,
}

/// Pose of the second person relative to the first: a rotation `theta`
/// (radians) about the vertical axis, then a ground-plane offset `(x, z)`.
/// Serialized as `[theta, x, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct PlacementTuple {
    pub theta: f64,
    pub x: f64,
    pub z: f64,
}

impl From<[f64; 3]> for PlacementTuple {
    fn from(v: [f64; 3]) -> Self {
        Self { theta: v[0], x: v[1], z: v[2] }
    }
}

impl From<PlacementTuple> for [f64; 3] {
    fn from(p: PlacementTuple) -> Self {
        [p.theta, p.x, p.z]
    }
}

impl PlacementTuple {
    /// Facing the first person from one metre in front of them.
    pub const FACING: PlacementTuple = PlacementTuple { theta: PI, x: 0.0, z: 1.0 };

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.x.is_finite() && self.z.is_finite()
    }

    /// `theta` wrapped into `[-π, π]`; values already in range are kept bit-exact.
    pub fn normalized(&self) -> Self {
        let mut theta = self.theta;
        if !(-PI..=PI).contains(&theta) {
            let w = (theta + PI) % TAU;
            theta = if w < 0.0 { w + TAU } else { w } - PI;
        }
        Self { theta, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Call {
    pub task: CallTask,
    /// Motion description for `generate`; free text (usually empty) for `caption`.
    #[serde(default)]
    pub argument: String,
    /// Motion to caption, or for `generate` the motion whose tokens are extended.
    #[serde(default)]
    pub motion_ref: Option<String>,
    /// Present when the generated motion is a second person in the scene.
    #[serde(default)]
    pub placement: Option<PlacementTuple>,
}

impl Call {
    pub fn generate(argument: &str) -> Self {
        Self { task: CallTask::Generate, argument: argument.into(), motion_ref: None, placement: None }
    }

    pub fn extend(argument: &str, motion_ref: &str) -> Self {
        Self { motion_ref: Some(motion_ref.into()), ..Self::generate(argument) }
    }

    pub fn caption(motion_ref: &str) -> Self {
        Self { task: CallTask::Caption, argument: String::new(), motion_ref: Some(motion_ref.into()), placement: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plan {
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub calls: Vec<Call>,
}

impl Plan {
    pub fn answer(text: &str) -> Self {
        Self { response: Some(text.into()), calls: Vec::new() }
    }

    /// Strict parse: exactly one JSON object, nothing around it.
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text.trim()).map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plans always serialize")
    }

    pub fn generate_calls(&self) -> usize {
        self.calls.iter().filter(|c| c.task == CallTask::Generate).count()
    }

    /// Schema rules beyond the JSON shape. `known` tells whether a motion id
    /// exists in the session.
    pub fn validate(&self, known: &dyn Fn(&str) -> bool) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::Schema(m));
        if self.calls.is_empty() && self.response.as_deref().is_none_or(|r| r.trim().is_empty()) {
            return bad("a plan without calls needs a response".into());
        }
        for (i, c) in self.calls.iter().enumerate() {
            match c.task {
                CallTask::Generate => {
                    if c.argument.trim().is_empty() {
                        return bad(format!("call {i}: generate needs a description"));
                    }
                }
                CallTask::Caption => {
                    if c.motion_ref.is_none() {
                        return bad(format!("call {i}: caption needs motion_ref"));
                    }
                    if c.placement.is_some() {
                        return bad(format!("call {i}: caption cannot carry a placement"));
                    }
                }
            }
            if let Some(r) = &c.motion_ref {
                if !known(r) {
                    return bad(format!("call {i}: unknown motion '{r}'"));
                }
            }
            if let Some(p) = &c.placement {
                if !p.is_finite() {
                    return bad(format!("call {i}: placement must be finite"));
                }
            }
        }
        Ok(())
    }
}
