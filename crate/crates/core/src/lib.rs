//! Core of the motion agent.
//!
//! Everything in this crate is pure computation over owned buffers: the
//! motion feature layout and forward kinematics, a procedural paired
//! motion/caption corpus, the VQ motion tokenizer and its training loop,
//! a small decoder-only language model extended with motion tokens and
//! tuned through low-rank adapters, the generation/captioning metric suite,
//! and the plan-driven orchestrator that stitches agent calls together.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, network
//! backends, persistence and the CLI live in the `motion-agent` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agent;
pub mod codec;
pub mod corpus;
pub mod hash;
pub mod linalg;
pub mod lm;
pub mod metrics;
pub mod motion;
pub mod optim;
pub mod rng;

pub use codec::{Codebook, CodecConfig, MotionCodec, MotionTokenSeq};
pub use corpus::{Archetype, CorpusConfig, PairedCorpus};
pub use motion::{JointPositions, MotionError, MotionSequence, SkeletonSpec, TextAnnotation};
