use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::MotionError;
use crate::hash::Hasher;

/// Joint tree with rest-pose bone offsets (meters, parent-relative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub joint_count: usize,
    /// Parent index per joint; the root is its own parent.
    pub parent: Vec<usize>,
    pub bone_offsets: Vec<[f32; 3]>,
}

pub const PELVIS: usize = 0;
pub const SPINE: usize = 1;
pub const CHEST: usize = 2;
pub const HEAD: usize = 3;
pub const LEFT_HAND: usize = 4;
pub const RIGHT_HAND: usize = 5;
pub const LEFT_FOOT: usize = 6;
pub const RIGHT_FOOT: usize = 7;

impl SkeletonSpec {
    pub fn new(parent: Vec<usize>, bone_offsets: Vec<[f32; 3]>) -> Result<Self, MotionError> {
        let s = Self { joint_count: parent.len(), parent, bone_offsets };
        s.validate()?;
        Ok(s)
    }

    /// Eight-joint desk skeleton: pelvis, spine, chest, head, two hands hanging
    /// from the chest and two feet hanging from the pelvis.
    pub fn desk() -> Self {
        Self {
            joint_count: 8,
            parent: vec![0, 0, 1, 2, 2, 2, 0, 0],
            bone_offsets: vec![
                [0.0, 0.0, 0.0],
                [0.0, 0.25, 0.0],
                [0.0, 0.25, 0.0],
                [0.0, 0.25, 0.0],
                [0.45, -0.35, 0.0],
                [-0.45, -0.35, 0.0],
                [0.12, -0.9, 0.0],
                [-0.12, -0.9, 0.0],
            ],
        }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        let j = self.joint_count;
        if j == 0 {
            return Err(MotionError::InvalidSkeleton("no joints".into()));
        }
        if self.parent.len() != j || self.bone_offsets.len() != j {
            return Err(MotionError::InvalidSkeleton("array lengths differ from joint count".into()));
        }
        if self.parent[0] != 0 {
            return Err(MotionError::InvalidSkeleton("joint 0 must be the root".into()));
        }
        for (i, &p) in self.parent.iter().enumerate().skip(1) {
            if p >= j {
                return Err(MotionError::InvalidSkeleton(format!("joint {i} has parent {p} out of range")));
            }
            if p == i {
                return Err(MotionError::InvalidSkeleton(format!("joint {i} is a second root")));
            }
            // walk to the root; more than j hops means a cycle
            let mut cur = i;
            let mut hops = 0;
            while cur != 0 {
                cur = self.parent[cur];
                hops += 1;
                if hops > j {
                    return Err(MotionError::InvalidSkeleton(format!("cycle through joint {i}")));
                }
            }
        }
        if self.bone_offsets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MotionError::InvalidSkeleton("non-finite bone offset".into()));
        }
        if self.bone_offsets[0] != [0.0; 3] {
            return Err(MotionError::InvalidSkeleton("root offset must be zero".into()));
        }
        Ok(())
    }

    /// Feature width `4 + 3(J-1)`.
    pub fn feature_dim(&self) -> usize {
        4 + 3 * (self.joint_count - 1)
    }

    /// Rest-pose joint positions relative to the root.
    pub fn rest_pose(&self) -> Vec<[f64; 3]> {
        let mut out = vec![[0.0f64; 3]; self.joint_count];
        for i in 1..self.joint_count {
            // parents precede children in every skeleton we build; fall back to a walk otherwise
            let mut acc = [0.0f64; 3];
            let mut cur = i;
            while cur != 0 {
                for k in 0..3 {
                    acc[k] += self.bone_offsets[cur][k] as f64;
                }
                cur = self.parent[cur];
            }
            out[i] = acc;
        }
        out
    }

    pub fn hash_hex(&self) -> alloc::string::String {
        let mut h = Hasher::new();
        h.u64(self.joint_count as u64);
        for &p in &self.parent {
            h.u64(p as u64);
        }
        for o in &self.bone_offsets {
            h.f32s(o);
        }
        h.finish_hex()
    }
}
