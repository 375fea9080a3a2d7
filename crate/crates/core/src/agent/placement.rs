#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::plan::PlacementTuple;
use super::AgentError;
use crate::motion::fk::rot_y;
use crate::motion::{JointPositions, MotionSequence};

/// World joints of both people; the tracks may differ in length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePair {
    pub first: JointPositions,
    pub second: JointPositions,
    pub placement: PlacementTuple,
}

/// Rotates every joint about the vertical axis through the origin.
pub fn rotate_about_vertical(joints: &JointPositions, theta: f64) -> JointPositions {
    let mut out = joints.clone();
    for p in out.positions.chunks_mut(3) {
        let (x, z) = rot_y(theta, p[0], p[2]);
        p[0] = x;
        p[2] = z;
    }
    out
}

pub fn translate(joints: &JointPositions, x: f64, z: f64) -> JointPositions {
    let mut out = joints.clone();
    for p in out.positions.chunks_mut(3) {
        p[0] += x;
        p[2] += z;
    }
    out
}

/// Person one starts at the origin; person two is rotated by `theta` about
/// the vertical axis and then moved to `(x, z)`.
pub fn place_second_person(m1: &MotionSequence, m2: &MotionSequence, r: PlacementTuple) -> Result<ScenePair, AgentError> {
    if m1.skeleton() != m2.skeleton() {
        return Err(AgentError::SkeletonMismatch);
    }
    if !r.is_finite() {
        return Err(AgentError::Schema("placement must be finite".into()));
    }
    let r = r.normalized();
    let second = translate(&rotate_about_vertical(&m2.forward_kinematics(), r.theta), r.x, r.z);
    Ok(ScenePair { first: m1.forward_kinematics(), second, placement: r })
}
