//! Codec and language-model artifacts stored in [`Container`]s.

use std::path::Path;

use motion_agent_core::codec::{Codebook, CodecConfig, EncoderDecoderParams, MotionCodec};
use motion_agent_core::lm::{AdapterSet, BaseModelParams, LmConfig, Task, Vocabulary};
use motion_agent_core::optim::ParamSet;
use motion_agent_core::SkeletonSpec;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::container::{field, ArtifactError, Container};

pub const CODEC_KIND: &str = "motion-codec";
pub const MODEL_KIND: &str = "motion-lm";

pub fn codec_container(codec: &MotionCodec, training: Value) -> Container {
    let c = &codec.config;
    let header = json!({
        "K": c.codebook_size,
        "d": c.latent_dim,
        "N": c.downsample,
        "gamma": c.decay,
        "epsilon": c.epsilon,
        "alpha": c.alpha,
        "beta": c.beta,
        "skeleton_hash": codec.skeleton.hash_hex(),
        "config": c,
        "skeleton": codec.skeleton,
        "fps": codec.fps,
        "codec_hash": codec.artifact_hash(),
        "frozen": true,
    });
    let mut out = Container::new(CODEC_KIND, header, training);
    for (i, t) in codec.params.tensors().iter().enumerate() {
        out.push(format!("param.{i}"), t);
    }
    out.push("norm.mean", &codec.params.norm.mean);
    out.push("norm.std", &codec.params.norm.std);
    let cb = &codec.codebook;
    out.push("codebook.codes", &cb.codes);
    out.push("codebook.ema_cluster_size", &cb.ema_cluster_size);
    out.push("codebook.ema_embed_sum", &cb.ema_embed_sum);
    out.push("codebook.usage_age", &cb.usage_age.iter().map(|&a| a as f64).collect::<Vec<_>>());
    out
}

pub fn codec_from_container(c: &Container) -> Result<MotionCodec, ArtifactError> {
    let config: CodecConfig = field(&c.header, "config")?;
    let skeleton: SkeletonSpec = field(&c.header, "skeleton")?;
    let fps: f32 = field(&c.header, "fps")?;
    let recorded: String = field(&c.header, "codec_hash")?;
    config.validate().map_err(|_| ArtifactError::Field("config".into()))?;
    let mut params = EncoderDecoderParams::init(&config, 0);
    for (i, t) in params.tensors_mut().into_iter().enumerate() {
        c.fill(&format!("param.{i}"), t)?;
    }
    c.fill("norm.mean", &mut params.norm.mean)?;
    c.fill("norm.std", &mut params.norm.std)?;
    let (k, d) = (config.codebook_size, config.latent_dim);
    let mut codebook = Codebook::from_codes(vec![0.0; k * d], k, d, config.decay, config.epsilon);
    c.fill("codebook.codes", &mut codebook.codes)?;
    c.fill("codebook.ema_cluster_size", &mut codebook.ema_cluster_size)?;
    c.fill("codebook.ema_embed_sum", &mut codebook.ema_embed_sum)?;
    let mut ages = vec![0.0; k];
    c.fill("codebook.usage_age", &mut ages)?;
    codebook.usage_age = ages.iter().map(|&a| a as u32).collect();
    let codec = MotionCodec { config, params, codebook, skeleton, fps };
    let computed = codec.artifact_hash();
    if computed != recorded {
        return Err(ArtifactError::Hash { what: "codec".into(), recorded, computed });
    }
    Ok(codec)
}

pub fn save_codec(codec: &MotionCodec, training: Value, path: &Path) -> Result<String, ArtifactError> {
    let c = codec_container(codec, training);
    c.write(path)?;
    Ok(c.digest())
}

pub fn load_codec(path: &Path) -> Result<(MotionCodec, Container), ArtifactError> {
    let c = Container::read(path, CODEC_KIND)?;
    Ok((codec_from_container(&c)?, c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterInfo {
    pub task: Task,
    pub rank: usize,
    pub alpha: f64,
    pub dropout: f64,
    pub hash: String,
}

/// Frozen base, its vocabulary and any task adapters.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    pub vocab: Vocabulary,
    pub base: BaseModelParams,
    pub adapters: Vec<AdapterSet>,
    /// Training configuration and logs carried along with the weights.
    pub training: Value,
}

impl LanguageModel {
    pub fn adapter(&self, task: Task) -> Option<&AdapterSet> {
        self.adapters.iter().find(|a| a.task == task)
    }

    pub fn set_adapter(&mut self, adapter: AdapterSet) {
        self.adapters.retain(|a| a.task != adapter.task);
        self.adapters.push(adapter);
        self.adapters.sort_by_key(|a| a.task);
    }

    pub fn to_container(&self) -> Container {
        let cfg: &LmConfig = &self.base.config;
        let adapters: Vec<AdapterInfo> = self
            .adapters
            .iter()
            .map(|a| AdapterInfo { task: a.task, rank: a.rank, alpha: a.alpha, dropout: a.dropout, hash: a.hash() })
            .collect();
        let header = json!({
            "B": self.base.base_vocab,
            "K": self.vocab.motion_count(),
            "h": cfg.hidden,
            "blocks": cfg.blocks,
            "heads": cfg.heads,
            "ffn": cfg.ffn,
            "config": cfg,
            "vocab_size": self.base.vocab_size,
            "base_hash": self.base.base_hash(),
            "full_hash": self.base.full_hash(),
            "frozen": true,
            "adapters": adapters,
            "vocabulary": self.vocab,
        });
        let mut out = Container::new(MODEL_KIND, header, self.training.clone());
        for (i, t) in self.base.tensors().iter().enumerate() {
            out.push(format!("base.{i}"), t);
        }
        for a in &self.adapters {
            for (i, t) in a.tensors().iter().enumerate() {
                out.push(format!("adapter.{}.{i}", a.task.name()), t);
            }
        }
        out
    }

    pub fn from_container(c: &Container) -> Result<Self, ArtifactError> {
        let config: LmConfig = field(&c.header, "config")?;
        let b: usize = field(&c.header, "B")?;
        let vocab_size: usize = field(&c.header, "vocab_size")?;
        let vocab: Vocabulary = field(&c.header, "vocabulary")?;
        if vocab.size() != vocab_size || vocab.base_size() != b || vocab_size < b {
            return Err(ArtifactError::Field("vocabulary".into()));
        }
        let mut base = BaseModelParams::init(&config, b, 0);
        if vocab_size > b {
            base = base.extend_vocabulary(vocab_size - b, 0);
        }
        for (i, t) in base.tensors_mut().into_iter().enumerate() {
            c.fill(&format!("base.{i}"), t)?;
        }
        for (what, computed) in [("base_hash", base.base_hash()), ("full_hash", base.full_hash())] {
            let recorded: String = field(&c.header, what)?;
            if recorded != computed {
                return Err(ArtifactError::Hash { what: what.into(), recorded, computed });
            }
        }
        let infos: Vec<AdapterInfo> = field(&c.header, "adapters")?;
        let mut adapters = Vec::new();
        for info in infos {
            let mut a = AdapterSet::init(&base, info.task, info.rank, info.alpha, info.dropout, 0);
            for (i, t) in a.tensors_mut().into_iter().enumerate() {
                c.fill(&format!("adapter.{}.{i}", info.task.name()), t)?;
            }
            let computed = a.hash();
            if computed != info.hash {
                return Err(ArtifactError::Hash { what: format!("{} adapter", info.task.name()), recorded: info.hash, computed });
            }
            adapters.push(a);
        }
        Ok(Self { vocab, base, adapters, training: c.config.clone() })
    }

    pub fn save(&self, path: &Path) -> Result<String, ArtifactError> {
        let c = self.to_container();
        c.write(path)?;
        Ok(c.digest())
    }

    pub fn load(path: &Path) -> Result<(Self, Container), ArtifactError> {
        let c = Container::read(path, MODEL_KIND)?;
        Ok((Self::from_container(&c)?, c))
    }
}
