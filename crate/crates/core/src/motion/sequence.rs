use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::fk::{forward_kinematics_raw, JointPositions};
use super::{MotionError, SkeletonSpec};

/// Channel offsets of the per-frame feature vector.
///
/// `[yaw velocity (rad/frame), root velocity x, z (m/frame, heading frame),
/// root height (m), (J-1) root-relative joint positions (m, heading frame)]`
pub struct FeatureLayout;

impl FeatureLayout {
    pub const YAW_VEL: usize = 0;
    pub const VEL_X: usize = 1;
    pub const VEL_Z: usize = 2;
    pub const HEIGHT: usize = 3;
    pub const LOCAL: usize = 4;

    /// Offset of the local position of joint `j >= 1`.
    pub const fn joint(j: usize) -> usize {
        Self::LOCAL + 3 * (j - 1)
    }
}

/// Continuous motion, `T × D` features stored row-major as `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSequence {
    frames: Vec<f32>,
    num_frames: usize,
    fps: f32,
    skeleton: SkeletonSpec,
}

impl MotionSequence {
    pub fn new(frames: Vec<f32>, fps: f32, skeleton: SkeletonSpec) -> Result<Self, MotionError> {
        skeleton.validate()?;
        let d = skeleton.feature_dim();
        if frames.is_empty() {
            return Err(MotionError::Empty);
        }
        if frames.len() % d != 0 {
            return Err(MotionError::DimensionMismatch { expected: d, got: frames.len() % d });
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(MotionError::BadFps(fps));
        }
        let num_frames = frames.len() / d;
        for (i, v) in frames.iter().enumerate() {
            if !v.is_finite() {
                return Err(MotionError::NonFinite { frame: i / d, channel: i % d });
            }
        }
        for t in 0..num_frames {
            let h = frames[t * d + FeatureLayout::HEIGHT];
            if h < 0.0 {
                return Err(MotionError::NegativeHeight { frame: t, value: h });
            }
        }
        Ok(Self { frames, num_frames, fps, skeleton })
    }

    /// Builds from `f64` features, rounding to `f32` and clamping root height at zero.
    pub fn from_f64(frames: &[f64], fps: f32, skeleton: SkeletonSpec) -> Result<Self, MotionError> {
        let d = skeleton.feature_dim();
        let mut out: Vec<f32> = frames.iter().map(|&v| v as f32).collect();
        for t in 0..out.len() / d.max(1) {
            let h = &mut out[t * d + FeatureLayout::HEIGHT];
            if *h < 0.0 {
                *h = 0.0;
            }
        }
        Self::new(out, fps, skeleton)
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn dim(&self) -> usize {
        self.skeleton.feature_dim()
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn skeleton(&self) -> &SkeletonSpec {
        &self.skeleton
    }

    pub fn frames(&self) -> &[f32] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let d = self.dim();
        &self.frames[t * d..(t + 1) * d]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.frames.iter().map(|&v| v as f64).collect()
    }

    pub fn forward_kinematics(&self) -> JointPositions {
        forward_kinematics_raw(&self.to_f64(), self.num_frames, self.skeleton.joint_count)
    }

    /// Repeats the last frame until the length is a multiple of `n`.
    pub fn padded_to_multiple(&self, n: usize) -> Self {
        let rem = self.num_frames % n;
        if rem == 0 {
            return self.clone();
        }
        let d = self.dim();
        let mut frames = self.frames.clone();
        let last: Vec<f32> = self.frame(self.num_frames - 1).to_vec();
        for _ in 0..(n - rem) {
            frames.extend_from_slice(&last);
        }
        Self { num_frames: frames.len() / d, frames, fps: self.fps, skeleton: self.skeleton.clone() }
    }

    /// First `len` frames (at least one).
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.clamp(1, self.num_frames);
        let d = self.dim();
        Self {
            frames: self.frames[..len * d].to_vec(),
            num_frames: len,
            fps: self.fps,
            skeleton: self.skeleton.clone(),
        }
    }

    /// Frame-level concatenation. Because root channels are velocities the
    /// second motion continues from wherever the first one ends.
    pub fn concat(&self, other: &Self) -> Result<Self, MotionError> {
        if self.skeleton != other.skeleton {
            return Err(MotionError::SkeletonMismatch);
        }
        let mut frames = self.frames.clone();
        frames.extend_from_slice(&other.frames);
        Ok(Self {
            num_frames: self.num_frames + other.num_frames,
            frames,
            fps: self.fps,
            skeleton: self.skeleton.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn zeros(t: usize) -> MotionSequence {
        let s = SkeletonSpec::desk();
        MotionSequence::new(vec![0.0; t * s.feature_dim()], 20.0, s).unwrap()
    }

    #[test]
    fn validation_errors() {
        let s = SkeletonSpec::desk();
        assert_eq!(MotionSequence::new(vec![], 20.0, s.clone()), Err(MotionError::Empty));
        assert!(matches!(
            MotionSequence::new(vec![0.0; 24], 20.0, s.clone()),
            Err(MotionError::DimensionMismatch { .. })
        ));
        let mut f = vec![0.0; 50];
        f[25 + 7] = f32::NAN;
        assert_eq!(
            MotionSequence::new(f, 20.0, s.clone()),
            Err(MotionError::NonFinite { frame: 1, channel: 7 })
        );
        let mut f = vec![0.0; 25];
        f[FeatureLayout::HEIGHT] = -0.1;
        assert!(matches!(MotionSequence::new(f, 20.0, s.clone()), Err(MotionError::NegativeHeight { .. })));
        assert!(matches!(MotionSequence::new(vec![0.0; 25], 0.0, s), Err(MotionError::BadFps(_))));
    }

    #[test]
    fn padding_repeats_last_frame() {
        let s = SkeletonSpec::desk();
        let mut f = vec![0.0; 5 * 25];
        f[4 * 25 + 10] = 1.5;
        let m = MotionSequence::new(f, 20.0, s).unwrap();
        let p = m.padded_to_multiple(4);
        assert_eq!(p.num_frames(), 8);
        for t in 4..8 {
            assert_eq!(p.frame(t)[10], 1.5);
        }
        assert_eq!(zeros(8).padded_to_multiple(4).num_frames(), 8);
    }

    #[test]
    fn from_f64_clamps_height() {
        let mut f = vec![0.0f64; 25];
        f[FeatureLayout::HEIGHT] = -0.2;
        let m = MotionSequence::from_f64(&f, 20.0, SkeletonSpec::desk()).unwrap();
        assert_eq!(m.frame(0)[FeatureLayout::HEIGHT], 0.0);
    }
}
