//! JSON configuration shared by every subcommand.
//!
//! A config file only lists what it changes: it is merged key by key over the
//! defaults of its `profile` (`"desk"` unless stated).

use std::fs;
use std::path::{Path, PathBuf};

use motion_agent_core::agent::BackendKind;
use motion_agent_core::codec::{CodecConfig, TrainVqConfig};
use motion_agent_core::corpus::{CorpusConfig, Split};
use motion_agent_core::lm::{FinetuneConfig, GenerationConfig, LmConfig, LoraConfig, PretrainConfig, Task};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub repeats: usize,
    /// Output width of the feature extractor.
    pub feature_dim: usize,
    pub split: Split,
    /// Decoding for the repeated generation metrics; serving stays greedy.
    pub sampling: GenerationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub kind: BackendKind,
    /// Chat-completions URL for the remote backend.
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub model: String,
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub listen: String,
    pub planner: PlannerConfig,
    /// Defaults to `<dir>/codec.mac`.
    pub codec_path: Option<PathBuf>,
    /// Defaults to `<dir>/model.mlm`.
    pub model_path: Option<PathBuf>,
    /// Defaults to `<dir>/sessions`.
    pub session_dir: Option<PathBuf>,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub bearer_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub profile: String,
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub codec: CodecConfig,
    pub train_codec: TrainVqConfig,
    pub lm: LmConfig,
    pub pretrain: PretrainConfig,
    pub finetune_generation: FinetuneConfig,
    pub finetune_captioning: FinetuneConfig,
    pub generation: GenerationConfig,
    pub eval: EvalConfig,
    pub service: ServiceConfig,
}

impl Config {
    pub fn desk() -> Self {
        let skeleton_dim = motion_agent_core::SkeletonSpec::desk().feature_dim();
        Self {
            profile: "desk".into(),
            seed: 0,
            corpus: CorpusConfig::default(),
            codec: CodecConfig::desk(skeleton_dim),
            train_codec: TrainVqConfig::default(),
            lm: LmConfig::desk(),
            pretrain: PretrainConfig::default(),
            finetune_generation: FinetuneConfig::desk(Task::Generation),
            finetune_captioning: FinetuneConfig::desk(Task::Captioning),
            generation: GenerationConfig::default(),
            eval: EvalConfig {
                repeats: 20,
                feature_dim: 16,
                split: Split::Test,
                sampling: GenerationConfig { temperature: 0.8, top_k: Some(8), ..GenerationConfig::default() },
            },
            service: ServiceConfig {
                listen: "127.0.0.1:8080".into(),
                planner: PlannerConfig {
                    kind: BackendKind::RuleBased,
                    endpoint: "https://api.openai.com/v1/chat/completions".into(),
                    api_key_env: "MOTION_AGENT_API_KEY".into(),
                    model: "gpt-4".into(),
                    timeout_secs: 60,
                },
                codec_path: None,
                model_path: None,
                session_dir: None,
                bearer_token: None,
            },
        }
    }

    /// Codec and adapter sizes of the published setup.
    pub fn full() -> Self {
        let mut c = Self::desk();
        c.profile = "full".into();
        c.codec = CodecConfig::full(c.codec.feature_dim);
        c.finetune_generation.lora = LoraConfig::full(Task::Generation);
        c.finetune_captioning.lora = LoraConfig::full(Task::Captioning);
        c
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let user: Value = serde_json::from_str(text)?;
        let mut base = match user.get("profile").and_then(Value::as_str) {
            None | Some("desk") => serde_json::to_value(Self::desk())?,
            Some("full") => serde_json::to_value(Self::full())?,
            Some(other) => return Err(ConfigError::Profile(other.into())),
        };
        merge(&mut base, user, "")?;
        Ok(serde_json::from_value(base)?)
    }

    /// Loads `path`, or the desk defaults when `None`, and applies the seed.
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self, ConfigError> {
        let mut c = match path {
            Some(p) => Self::from_json(&fs::read_to_string(p).map_err(|e| ConfigError::Io(p.to_path_buf(), e))?)?,
            None => Self::desk(),
        };
        if let Some(s) = seed {
            c.seed = s;
        }
        c.propagate_seed();
        Ok(c)
    }

    /// Copies `seed` into every stage.
    pub fn propagate_seed(&mut self) {
        self.train_codec.seed = self.seed;
        self.pretrain.seed = self.seed;
        self.finetune_generation.seed = self.seed;
        self.finetune_captioning.seed = self.seed;
        self.generation.seed = self.seed;
        self.eval.sampling.seed = self.seed;
    }

    pub fn finetune(&self, task: Task) -> &FinetuneConfig {
        match task {
            Task::Generation => &self.finetune_generation,
            Task::Captioning => &self.finetune_captioning,
        }
    }
}

fn merge(base: &mut Value, user: Value, path: &str) -> Result<(), ConfigError> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &here)?,
                    None => return Err(ConfigError::UnknownKey(here)),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("unknown profile '{0}' (expected desk or full)")]
    Profile(String),
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
}

/// File layout of a working directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn corpus(&self) -> PathBuf {
        self.dir.join("corpus")
    }

    pub fn codec(&self) -> PathBuf {
        self.dir.join("codec.mac")
    }

    pub fn model(&self) -> PathBuf {
        self.dir.join("model.mlm")
    }

    pub fn eval_report(&self) -> PathBuf {
        self.dir.join("eval.json")
    }

    pub fn sessions(&self) -> PathBuf {
        self.dir.join("sessions")
    }

    pub fn log(&self, stage: &str) -> PathBuf {
        self.dir.join("logs").join(format!("{stage}.json"))
    }
}
