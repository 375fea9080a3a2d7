#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::sequence::FeatureLayout as L;

/// World-frame joint positions, `T × J × 3` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPositions {
    pub num_frames: usize,
    pub joint_count: usize,
    pub positions: Vec<f64>,
}

impl JointPositions {
    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        let o = (t * self.joint_count + j) * 3;
        [self.positions[o], self.positions[o + 1], self.positions[o + 2]]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let w = self.joint_count * 3;
        &self.positions[t * w..(t + 1) * w]
    }

    /// Nested `[T][J][3]` view for JSON consumers.
    pub fn to_nested(&self) -> Vec<Vec<[f64; 3]>> {
        (0..self.num_frames)
            .map(|t| (0..self.joint_count).map(|j| self.joint(t, j)).collect())
            .collect()
    }
}

/// Rotation about the vertical axis applied to an `(x, z)` pair.
#[inline]
pub(crate) fn rot_y(theta: f64, x: f64, z: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * x + s * z, -s * x + c * z)
}

#[inline]
fn rot_y_deriv(theta: f64, x: f64, z: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (-s * x + c * z, -c * x - s * z)
}

/// Integrates root yaw and planar velocity (exclusive prefix sums starting at
/// the origin facing +z) and places root-relative joints in the world frame.
pub fn forward_kinematics_raw(frames: &[f64], num_frames: usize, joint_count: usize) -> JointPositions {
    let d = 4 + 3 * (joint_count - 1);
    debug_assert_eq!(frames.len(), num_frames * d);
    let mut positions = vec![0.0; num_frames * joint_count * 3];
    let (mut yaw, mut px, mut pz) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..num_frames {
        let f = &frames[t * d..(t + 1) * d];
        let h = f[L::HEIGHT];
        let out = &mut positions[t * joint_count * 3..(t + 1) * joint_count * 3];
        out[0] = px;
        out[1] = h;
        out[2] = pz;
        for j in 1..joint_count {
            let o = L::joint(j);
            let (wx, wz) = rot_y(yaw, f[o], f[o + 2]);
            out[j * 3] = px + wx;
            out[j * 3 + 1] = h + f[o + 1];
            out[j * 3 + 2] = pz + wz;
        }
        let (vx, vz) = rot_y(yaw, f[L::VEL_X], f[L::VEL_Z]);
        px += vx;
        pz += vz;
        yaw += f[L::YAW_VEL];
    }
    JointPositions { num_frames, joint_count, positions }
}

/// Reverse-mode pass of [`forward_kinematics_raw`]: maps `dL/dp` onto `dL/dfeatures`.
pub fn fk_backward(frames: &[f64], num_frames: usize, joint_count: usize, grad_pos: &[f64]) -> Vec<f64> {
    let d = 4 + 3 * (joint_count - 1);
    let mut grad = vec![0.0; num_frames * d];
    let mut yaws = Vec::with_capacity(num_frames);
    let mut yaw = 0.0;
    for t in 0..num_frames {
        yaws.push(yaw);
        yaw += frames[t * d + L::YAW_VEL];
    }
    // running totals of dL/dpos[t+1] and dL/dyaw[t+1]
    let (mut gpx_next, mut gpz_next, mut gyaw_next) = (0.0f64, 0.0f64, 0.0f64);
    for t in (0..num_frames).rev() {
        let f = &frames[t * d..(t + 1) * d];
        let gp = &grad_pos[t * joint_count * 3..(t + 1) * joint_count * 3];
        let g = &mut grad[t * d..(t + 1) * d];
        let theta = yaws[t];
        let (mut dpx, mut dpz, mut dyaw) = (gp[0], gp[2], 0.0);
        g[L::HEIGHT] += gp[1];
        for j in 1..joint_count {
            let o = L::joint(j);
            let (gx, gy, gz) = (gp[j * 3], gp[j * 3 + 1], gp[j * 3 + 2]);
            dpx += gx;
            dpz += gz;
            g[L::HEIGHT] += gy;
            // R^T applied to the world gradient
            let (s, c) = theta.sin_cos();
            g[o] += c * gx - s * gz;
            g[o + 2] += s * gx + c * gz;
            g[o + 1] += gy;
            let (rx, rz) = rot_y_deriv(theta, f[o], f[o + 2]);
            dyaw += gx * rx + gz * rz;
        }
        // pos[t+1] = pos[t] + R(yaw[t]) v[t],  yaw[t+1] = yaw[t] + w[t]
        if t + 1 < num_frames {
            let (s, c) = theta.sin_cos();
            g[L::VEL_X] += c * gpx_next - s * gpz_next;
            g[L::VEL_Z] += s * gpx_next + c * gpz_next;
            let (rx, rz) = rot_y_deriv(theta, f[L::VEL_X], f[L::VEL_Z]);
            dyaw += gpx_next * rx + gpz_next * rz;
            g[L::YAW_VEL] += gyaw_next;
            dyaw += gyaw_next;
        }
        gpx_next = dpx + if t + 1 < num_frames { gpx_next } else { 0.0 };
        gpz_next = dpz + if t + 1 < num_frames { gpz_next } else { 0.0 };
        gyaw_next = dyaw;
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_features_stay_at_origin() {
        let fk = forward_kinematics_raw(&vec![0.0; 3 * 7], 3, 2);
        assert!(fk.positions.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_velocity_integrates_linearly() {
        let (t, j, v) = (10, 2, 0.05);
        let d = 4 + 3 * (j - 1);
        let mut f = vec![0.0; t * d];
        for i in 0..t {
            f[i * d + L::VEL_X] = v;
        }
        let fk = forward_kinematics_raw(&f, t, j);
        for i in 0..t {
            assert!((fk.joint(i, 0)[0] - i as f64 * v).abs() < 1e-12);
        }
    }

    #[test]
    fn yaw_rotates_local_offsets() {
        let d = 7;
        let mut f = vec![0.0; 2 * d];
        f[L::YAW_VEL] = core::f64::consts::FRAC_PI_2;
        f[d + 4 + 2] = 1.0; // joint 1 one meter ahead (+z) at frame 1
        let fk = forward_kinematics_raw(&f, 2, 2);
        let p = fk.joint(1, 1);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[2].abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (t, j) = (6, 3);
        let d = 4 + 3 * (j - 1);
        let mut r = rng::seeded(7);
        let mut f = vec![0.0; t * d];
        rng::fill_normal(&mut r, &mut f, 0.3);
        let mut w = vec![0.0; t * j * 3];
        rng::fill_normal(&mut r, &mut w, 1.0);
        let loss = |f: &[f64]| -> f64 {
            let p = forward_kinematics_raw(f, t, j);
            p.positions.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let g = fk_backward(&f, t, j, &w);
        for i in 0..f.len() {
            let mut fp = f.clone();
            fp[i] += 1e-6;
            let mut fm = f.clone();
            fm[i] -= 1e-6;
            let num = (loss(&fp) - loss(&fm)) / 2e-6;
            assert!((num - g[i]).abs() < 1e-6 * (1.0 + num.abs()), "channel {i}: {num} vs {}", g[i]);
        }
    }

    #[test]
    fn prepended_velocity_frame_shifts_everything() {
        let (t, j) = (5, 3);
        let d = 4 + 3 * (j - 1);
        let mut r = rng::seeded(3);
        let mut f = vec![0.0; t * d];
        rng::fill_normal(&mut r, &mut f, 0.2);
        let base = forward_kinematics_raw(&f, t, j);
        let mut pre = vec![0.0; d];
        pre[L::VEL_X] = 0.3;
        pre[L::VEL_Z] = -0.1;
        pre.extend_from_slice(&f);
        let shifted = forward_kinematics_raw(&pre, t + 1, j);
        for i in 0..t {
            for k in 0..j {
                let a = base.joint(i, k);
                let b = shifted.joint(i + 1, k);
                assert!((b[0] - a[0] - 0.3).abs() < 1e-12);
                assert!((b[1] - a[1]).abs() < 1e-12);
                assert!((b[2] - a[2] + 0.1).abs() < 1e-12);
            }
        }
    }
}
