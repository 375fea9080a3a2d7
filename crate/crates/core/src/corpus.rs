//! Procedural paired motion/caption corpus.
//!
//! Each item is one parametric archetype (walk, turn, wave, crouch) rendered
//! on the desk skeleton, with templated captions that name the archetype and
//! its qualitative parameters so captions are faithful by construction.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::motion::skeleton::{CHEST, HEAD, LEFT_FOOT, LEFT_HAND, RIGHT_FOOT, RIGHT_HAND};
use crate::motion::{FeatureLayout as L, MotionError, MotionSequence, SkeletonSpec, TextAnnotation};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    Walk,
    Turn,
    Wave,
    Crouch,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [Archetype::Walk, Archetype::Turn, Archetype::Wave, Archetype::Crouch];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::Walk => "walk",
            Archetype::Turn => "turn",
            Archetype::Wave => "wave",
            Archetype::Crouch => "crouch",
        }
    }

    /// Third-person verb used in captions.
    pub fn verb(self) -> &'static str {
        match self {
            Archetype::Walk => "walks",
            Archetype::Turn => "turns",
            Archetype::Wave => "waves",
            Archetype::Crouch => "crouches",
        }
    }

    /// Finds the archetype named by any inflection of its verb in a caption.
    pub fn from_caption(text: &str) -> Option<Self> {
        let words = crate::motion::normalize_text(text);
        for w in &words {
            for a in Self::ALL {
                let stem = a.name();
                if w == stem || w == a.verb() || (w.starts_with(stem) && w.len() <= stem.len() + 3) {
                    return Some(a);
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pace {
    Slowly,
    Normally,
    Quickly,
}

impl Pace {
    /// Walking speed range in m/s.
    pub fn speed_range(self) -> (f64, f64) {
        match self {
            Pace::Slowly => (0.5, 0.8),
            Pace::Normally => (1.0, 1.3),
            Pace::Quickly => (1.6, 2.0),
        }
    }

    fn word(self) -> Option<&'static str> {
        match self {
            Pace::Slowly => Some("slowly"),
            Pace::Normally => None,
            Pace::Quickly => Some("quickly"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn word(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// Generator parameters of one item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "archetype", rename_all = "lowercase")]
pub enum MotionParams {
    Walk { pace: Pace, speed: f64 },
    Turn { side: Side, angle: f64 },
    Wave { side: Side, frequency: f64 },
    Crouch { deep: bool, depth: f64 },
}

impl MotionParams {
    pub fn archetype(&self) -> Archetype {
        match self {
            MotionParams::Walk { .. } => Archetype::Walk,
            MotionParams::Turn { .. } => Archetype::Turn,
            MotionParams::Wave { .. } => Archetype::Wave,
            MotionParams::Crouch { .. } => Archetype::Crouch,
        }
    }

    /// Templated captions; the first is the canonical one.
    pub fn captions(&self) -> Vec<String> {
        match *self {
            MotionParams::Walk { pace, .. } => match pace.word() {
                Some(w) => vec![format!("a person walks forward {w}"), format!("someone walks {w} forward")],
                None => vec!["a person walks forward".into(), "someone walks straight ahead".into()],
            },
            MotionParams::Turn { side, .. } => vec![
                format!("a person turns to the {}", side.word()),
                format!("someone turns {} in place", side.word()),
            ],
            MotionParams::Wave { side, .. } => vec![
                format!("a person waves with the {} hand", side.word()),
                format!("someone raises the {} hand and waves", side.word()),
            ],
            MotionParams::Crouch { deep, .. } => {
                if deep {
                    vec!["a person crouches down low".into(), "someone crouches deeply and stands up".into()]
                } else {
                    vec!["a person crouches down".into(), "someone crouches and stands back up".into()]
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(archetype: Archetype, r: &mut R) -> Self {
        match archetype {
            Archetype::Walk => {
                let pace = [Pace::Slowly, Pace::Normally, Pace::Quickly][r.random_range(0..3)];
                let (lo, hi) = pace.speed_range();
                MotionParams::Walk { pace, speed: rng::uniform(r, lo, hi) }
            }
            Archetype::Turn => {
                let side = if r.random::<bool>() { Side::Left } else { Side::Right };
                MotionParams::Turn { side, angle: rng::uniform(r, 0.5 * PI, PI) }
            }
            Archetype::Wave => {
                let side = if r.random::<bool>() { Side::Left } else { Side::Right };
                MotionParams::Wave { side, frequency: rng::uniform(r, 1.2, 2.0) }
            }
            Archetype::Crouch => {
                let deep = r.random::<bool>();
                let depth = if deep { rng::uniform(r, 0.45, 0.55) } else { rng::uniform(r, 0.25, 0.35) };
                MotionParams::Crouch { deep, depth }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub archetypes: Vec<Archetype>,
    pub samples_per_archetype: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub fps: f32,
    /// Train/val/test fractions; test receives the remainder.
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            archetypes: Archetype::ALL.to_vec(),
            samples_per_archetype: 50,
            min_frames: 32,
            max_frames: 64,
            fps: 20.0,
            train_fraction: 0.7,
            val_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus config names no archetypes")]
    NoArchetypes,
    #[error("invalid corpus config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub motion: MotionSequence,
    pub annotations: Vec<TextAnnotation>,
    pub params: MotionParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedCorpus {
    pub items: Vec<CorpusItem>,
    pub split: Vec<Split>,
    pub seed: u64,
    pub config: CorpusConfig,
}

impl PairedCorpus {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.items.len()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn items_in(&self, split: Split) -> impl Iterator<Item = &CorpusItem> {
        self.items.iter().zip(&self.split).filter(move |(_, s)| **s == split).map(|(i, _)| i)
    }

    /// Split assignment as produced from `seed`; used to verify stored manifests.
    pub fn assign_splits(n: usize, seed: u64, train: f64, val: f64) -> Vec<Split> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::derive(seed, 2));
        let n_train = ((n as f64) * train).round() as usize;
        let n_val = ((n as f64) * val).round() as usize;
        let mut split = vec![Split::Test; n];
        for (rank, &i) in order.iter().enumerate() {
            split[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
        split
    }
}

pub fn synth_corpus(config: &CorpusConfig, seed: u64) -> Result<PairedCorpus, CorpusError> {
    if config.archetypes.is_empty() {
        return Err(CorpusError::NoArchetypes);
    }
    if config.min_frames < 8 || config.max_frames < config.min_frames {
        return Err(CorpusError::Invalid(format!(
            "frame range {}..={} (minimum 8)",
            config.min_frames, config.max_frames
        )));
    }
    if !(config.fps > 0.0) || !(0.0..=1.0).contains(&(config.train_fraction + config.val_fraction)) {
        return Err(CorpusError::Invalid("fps or split fractions out of range".into()));
    }
    let skeleton = SkeletonSpec::desk();
    let mut r = rng::derive(seed, 1);
    let mut items = Vec::new();
    for &arch in &config.archetypes {
        for k in 0..config.samples_per_archetype {
            let params = MotionParams::sample(arch, &mut r);
            let frames = r.random_range(config.min_frames..=config.max_frames);
            let phase = rng::uniform(&mut r, 0.0, TAU);
            let motion = render(&params, frames, config.fps, phase, &skeleton)?;
            let annotations = params
                .captions()
                .iter()
                .map(|c| TextAnnotation::new(c))
                .collect::<Result<Vec<_>, _>>()?;
            items.push(CorpusItem { id: format!("{}-{:04}", arch.name(), k), motion, annotations, params });
        }
    }
    let split = PairedCorpus::assign_splits(items.len(), seed, config.train_fraction, config.val_fraction);
    Ok(PairedCorpus { items, split, seed, config: config.clone() })
}

/// Renders one parametric motion into the feature layout.
pub fn render(
    params: &MotionParams,
    frames: usize,
    fps: f32,
    phase: f64,
    skeleton: &SkeletonSpec,
) -> Result<MotionSequence, MotionError> {
    let d = skeleton.feature_dim();
    let rest = skeleton.rest_pose();
    let dt = 1.0 / fps as f64;
    let stand = 0.95;
    let mut out = vec![0.0f64; frames * d];
    let span = (frames - 1).max(1) as f64;
    for t in 0..frames {
        let f = &mut out[t * d..(t + 1) * d];
        let time = t as f64 * dt;
        let u = t as f64 / span; // normalized progress 0..1
        let mut local = rest.clone();
        let mut height = stand;
        match *params {
            MotionParams::Walk { speed, .. } => {
                let stride_freq = 0.9 * speed + 0.8;
                let ph = TAU * stride_freq * time + phase;
                f[L::VEL_Z] = speed * dt;
                height = stand + 0.02 * (2.0 * ph).cos();
                let swing = 0.18 + 0.1 * speed;
                local[LEFT_FOOT][2] += swing * ph.sin();
                local[RIGHT_FOOT][2] -= swing * ph.sin();
                local[LEFT_FOOT][1] += 0.06 * ph.cos().max(0.0);
                local[RIGHT_FOOT][1] += 0.06 * (-ph.cos()).max(0.0);
                local[LEFT_HAND][2] -= 0.6 * swing * ph.sin();
                local[RIGHT_HAND][2] += 0.6 * swing * ph.sin();
            }
            MotionParams::Turn { side, angle } => {
                // smooth bell-shaped yaw velocity integrating to the full angle
                let w = (PI * u).sin();
                let norm: f64 = (0..frames).map(|s| (PI * s as f64 / span).sin()).sum::<f64>().max(1e-9);
                f[L::YAW_VEL] = side.sign() * angle * w / norm;
                let ph = TAU * 1.6 * time + phase;
                local[LEFT_FOOT][1] += 0.05 * ph.sin().max(0.0) * w;
                local[RIGHT_FOOT][1] += 0.05 * (-ph.sin()).max(0.0) * w;
                local[LEFT_HAND][0] += 0.05 * side.sign() * w;
                local[RIGHT_HAND][0] += 0.05 * side.sign() * w;
            }
            MotionParams::Wave { side, frequency } => {
                let hand = if side == Side::Left { LEFT_HAND } else { RIGHT_HAND };
                // raise over the first 20%, wave, lower over the last 15%
                let lift = smoothstep((u / 0.2).min(1.0)) * smoothstep(((1.0 - u) / 0.15).min(1.0));
                let target = [side.sign() * 0.35, 0.95, 0.1];
                for k in 0..3 {
                    local[hand][k] += lift * (target[k] - local[hand][k]);
                }
                local[hand][0] += lift * 0.15 * (TAU * frequency * time + phase).sin();
            }
            MotionParams::Crouch { depth, .. } => {
                let c = (PI * u).sin().powi(2);
                height = stand - depth * c;
                let drop = stand - height;
                local[LEFT_FOOT][1] += drop;
                local[RIGHT_FOOT][1] += drop;
                local[LEFT_FOOT][2] += 0.1 * c;
                local[RIGHT_FOOT][2] += 0.1 * c;
                local[LEFT_HAND][2] += 0.35 * c;
                local[RIGHT_HAND][2] += 0.35 * c;
                local[LEFT_HAND][1] += 0.2 * c;
                local[RIGHT_HAND][1] += 0.2 * c;
                local[CHEST][2] += 0.08 * c;
                local[HEAD][2] += 0.12 * c;
            }
        }
        f[L::HEIGHT] = height;
        for j in 1..skeleton.joint_count {
            let o = L::joint(j);
            f[o..o + 3].copy_from_slice(&local[j]);
        }
    }
    MotionSequence::from_f64(&out, fps, skeleton.clone())
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Kinematic summary used by the rule-based archetype classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSummary {
    /// Net yaw change over the clip (rad).
    pub net_yaw: f64,
    /// Mean planar root speed (m/s).
    pub mean_speed: f64,
    /// Highest hand height relative to the head, per side (m); left, right.
    pub hand_over_head: [f64; 2],
    /// Largest drop of the root below its first-frame height (m).
    pub max_drop: f64,
    /// Mean yaw velocity sign-weighted direction of travel in the heading frame (+ forward).
    pub forward_fraction: f64,
}

pub fn summarize(motion: &MotionSequence) -> MotionSummary {
    let t = motion.num_frames();
    let fk = motion.forward_kinematics();
    let net_yaw: f64 = (0..t).map(|i| motion.frame(i)[L::YAW_VEL] as f64).sum();
    let start = fk.joint(0, 0);
    let end = fk.joint(t - 1, 0);
    let dist = ((end[0] - start[0]).powi(2) + (end[2] - start[2]).powi(2)).sqrt();
    let duration = ((t - 1).max(1)) as f64 / motion.fps() as f64;
    let mut hand = [f64::NEG_INFINITY; 2];
    let mut max_drop = 0.0f64;
    let h0 = fk.joint(0, 0)[1].max(fk.joint(t - 1, 0)[1]);
    for i in 0..t {
        let head = fk.joint(i, HEAD)[1];
        hand[0] = hand[0].max(fk.joint(i, LEFT_HAND)[1] - head);
        hand[1] = hand[1].max(fk.joint(i, RIGHT_HAND)[1] - head);
        max_drop = max_drop.max(h0 - fk.joint(i, 0)[1]);
    }
    let fwd: f64 = (0..t).map(|i| motion.frame(i)[L::VEL_Z] as f64).sum();
    let side: f64 = (0..t).map(|i| (motion.frame(i)[L::VEL_X] as f64).abs()).sum();
    let forward_fraction = if fwd.abs() + side > 1e-9 { fwd / (fwd.abs() + side) } else { 0.0 };
    MotionSummary { net_yaw, mean_speed: dist / duration, hand_over_head: hand, max_drop, forward_fraction }
}

/// Rule-based archetype classifier over kinematic summaries.
pub fn classify(motion: &MotionSequence) -> Option<Archetype> {
    let s = summarize(motion);
    if s.max_drop > 0.15 {
        Some(Archetype::Crouch)
    } else if s.hand_over_head[0].max(s.hand_over_head[1]) > -0.1 {
        Some(Archetype::Wave)
    } else if s.net_yaw.abs() > 0.6 {
        Some(Archetype::Turn)
    } else if s.mean_speed > 0.3 {
        Some(Archetype::Walk)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusConfig {
        CorpusConfig { samples_per_archetype: 6, ..Default::default() }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = synth_corpus(&small(), 1).unwrap();
        let b = synth_corpus(&small(), 1).unwrap();
        assert_eq!(a, b);
        let c = synth_corpus(&small(), 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn counts_items() {
        let c = synth_corpus(&CorpusConfig::default(), 5).unwrap();
        assert_eq!(c.items.len(), 200);
        let n: usize = [Split::Train, Split::Val, Split::Test].iter().map(|&s| c.indices(s).len()).sum();
        assert_eq!(n, 200);
        assert_eq!(c.indices(Split::Train).len(), 140);
        assert_eq!(c.indices(Split::Test).len(), 40);
    }

    #[test]
    fn empty_archetypes_rejected() {
        let cfg = CorpusConfig { archetypes: vec![], ..Default::default() };
        assert_eq!(synth_corpus(&cfg, 1), Err(CorpusError::NoArchetypes));
    }

    #[test]
    fn walk_speed_matches_caption_range() {
        let c = synth_corpus(&CorpusConfig::default(), 11).unwrap();
        for item in c.items.iter().filter(|i| i.params.archetype() == Archetype::Walk) {
            let MotionParams::Walk { pace, .. } = item.params else { unreachable!() };
            let (lo, hi) = pace.speed_range();
            let s = summarize(&item.motion);
            assert!(s.mean_speed >= lo - 1e-4 && s.mean_speed <= hi + 1e-4, "{} {}", item.id, s.mean_speed);
            if let Some(w) = pace.word() {
                assert!(item.annotations[0].tokens.iter().any(|t| t == w));
            }
        }
    }

    #[test]
    fn walk_root_advances_along_facing() {
        let p = MotionParams::Walk { pace: Pace::Normally, speed: 1.2 };
        let m = render(&p, 40, 20.0, 0.3, &SkeletonSpec::desk()).unwrap();
        let fk = m.forward_kinematics();
        for t in 1..40 {
            let dz = fk.joint(t, 0)[2] - fk.joint(t - 1, 0)[2];
            // closed form: speed / fps per frame
            assert!((dz - 1.2 / 20.0).abs() < 1e-6);
            assert!(fk.joint(t, 0)[0].abs() < 1e-9);
        }
    }

    #[test]
    fn captions_are_recoverable_from_motion() {
        let c = synth_corpus(&CorpusConfig::default(), 3).unwrap();
        for item in &c.items {
            assert_eq!(classify(&item.motion), Some(item.params.archetype()), "{}", item.id);
            let s = summarize(&item.motion);
            match item.params {
                MotionParams::Turn { side, angle } => {
                    assert!((s.net_yaw - side.sign() * angle).abs() < 1e-4);
                }
                MotionParams::Wave { side, .. } => {
                    let (raised, other) = if side == Side::Left { (0, 1) } else { (1, 0) };
                    assert!(s.hand_over_head[raised] > s.hand_over_head[other]);
                }
                MotionParams::Crouch { deep, depth } => {
                    assert!((s.max_drop - depth).abs() < 0.02);
                    assert_eq!(deep, s.max_drop > 0.4);
                }
                MotionParams::Walk { .. } => {}
            }
            assert_eq!(Archetype::from_caption(&item.annotations[0].text), Some(item.params.archetype()));
        }
    }

    #[test]
    fn archetype_from_caption_inflections() {
        assert_eq!(Archetype::from_caption("A person is walking"), Some(Archetype::Walk));
        assert_eq!(Archetype::from_caption("crouching low"), Some(Archetype::Crouch));
        assert_eq!(Archetype::from_caption("jumps"), None);
    }
}
