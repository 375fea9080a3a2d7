//! Motion representation: skeleton topology, the velocity-based feature
//! layout, forward kinematics and caption annotations.

pub(crate) mod fk;
mod sequence;
pub mod skeleton;
mod text;

pub use fk::{fk_backward, forward_kinematics_raw, JointPositions};
pub use sequence::{FeatureLayout, MotionSequence};
pub use skeleton::SkeletonSpec;
pub use text::{normalize_text, TextAnnotation};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MotionError {
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("motion has no frames")]
    Empty,
    #[error("non-finite value at frame {frame}, channel {channel}")]
    NonFinite { frame: usize, channel: usize },
    #[error("negative root height {value} at frame {frame}")]
    NegativeHeight { frame: usize, value: f32 },
    #[error("feature width {got} does not match skeleton (expected {expected})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fps must be positive and finite, got {0}")]
    BadFps(f32),
    #[error("skeletons differ")]
    SkeletonMismatch,
    #[error("annotation text is empty")]
    EmptyAnnotation,
}
