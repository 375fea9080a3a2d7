//! The offline stages: corpus synthesis, codec training, base pretraining,
//! adapter fine-tuning, evaluation and scripted chat.

use std::fs;
use std::path::Path;

use log::info;
use motion_agent_core::agent::{run_turn, AgentError, LmAgent, PlannerBackend, Session};
use motion_agent_core::codec::{self, MotionCodec, TrainLog};
use motion_agent_core::corpus::{classify, synth_corpus, Archetype, PairedCorpus, Split};
use motion_agent_core::lm::{
    build_text_vocabulary, caption_example, extend_vocabulary, finetune_adapters, generate_caption,
    generate_motion_tokens, generation_example, pretrain_base, pretraining_texts, BaseTrainLog, FinetuneLog,
    GenerationConfig, Model, Task,
};
use motion_agent_core::metrics::{
    evaluate_captioning, evaluate_generation, caption_report, shuffled_pairs, CaptionReport, Captioner, EvalItem,
    FeatureExtractor, GenerationReport, MotionGenerator,
};
use motion_agent_core::MotionSequence;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifacts::{load_codec, save_codec, LanguageModel};
use crate::config::{Config, Layout};
use crate::container::ArtifactError;
use crate::corpus_io::{load_corpus, save_corpus, CorpusIoError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("corpus: {0}")]
    Corpus(#[from] motion_agent_core::corpus::CorpusError),
    #[error("corpus files: {0}")]
    CorpusIo(#[from] CorpusIoError),
    #[error("artifact: {0}")]
    Artifact(#[from] ArtifactError),
    #[error("codec: {0}")]
    Codec(#[from] codec::CodecError),
    #[error("codec training: {0}")]
    Train(String),
    #[error("language model: {0}")]
    Lm(#[from] motion_agent_core::lm::LmError),
    #[error("metrics: {0}")]
    Metric(#[from] motion_agent_core::metrics::MetricError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("{0}")]
    Missing(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn synth(cfg: &Config, layout: &Layout) -> Result<PairedCorpus, PipelineError> {
    let corpus = synth_corpus(&cfg.corpus, cfg.seed)?;
    save_corpus(&corpus, &layout.corpus())?;
    info!("wrote {} items to {}", corpus.items.len(), layout.corpus().display());
    Ok(corpus)
}

pub fn train_codec(cfg: &Config, layout: &Layout) -> Result<(MotionCodec, TrainLog), PipelineError> {
    let corpus = load_corpus(&layout.corpus())?;
    let result = codec::train_vq(&corpus, &cfg.codec, &cfg.train_codec, &mut |e| {
        info!("codec epoch {} loss {:.5} val L1 {:.5}", e.epoch, e.mean_total, e.val_l1);
        true
    });
    let (codec, log) = match result {
        Ok(ok) => ok,
        Err(e) => {
            if let Some(last) = &e.last_good {
                save_codec(last, json!({ "train": cfg.train_codec, "aborted": e.error.to_string() }), &layout.dir.join("codec.last-good.mac"))?;
            }
            return Err(PipelineError::Train(e.error.to_string()));
        }
    };
    save_codec(&codec, json!({ "train": cfg.train_codec, "corpus_seed": corpus.seed }), &layout.codec())?;
    write_json(&layout.log("train-codec"), &log)?;
    Ok((codec, log))
}

pub fn train_base(cfg: &Config, layout: &Layout) -> Result<BaseTrainLog, PipelineError> {
    let corpus = load_corpus(&layout.corpus())?;
    let vocab = build_text_vocabulary(&corpus);
    let train = pretraining_texts(&corpus, Split::Train);
    let val = pretraining_texts(&corpus, Split::Val);
    let (base, log) = pretrain_base(&vocab, &train, &val, &cfg.lm, &cfg.pretrain, &mut |e, nll| {
        info!("pretrain epoch {e} nll {nll:.4}");
    })?;
    let model = LanguageModel { vocab, base, adapters: Vec::new(), training: json!({ "pretrain": cfg.pretrain }) };
    model.save(&layout.model())?;
    write_json(&layout.log("train-base"), &log)?;
    Ok(log)
}

/// Extends the vocabulary with the codec's tokens on first use, then trains
/// the task's adapters on the training split.
pub fn finetune(cfg: &Config, layout: &Layout, task: Task) -> Result<FinetuneLog, PipelineError> {
    let corpus = load_corpus(&layout.corpus())?;
    let (codec, _) = load_codec(&layout.codec())?;
    let (mut model, _) = LanguageModel::load(&layout.model())?;
    if model.vocab.motion_count() == 0 {
        let (base, vocab) = extend_vocabulary(&model.base, &model.vocab, codec.codebook_size(), cfg.seed);
        model.base = base;
        model.vocab = vocab;
    } else if model.vocab.motion_count() != codec.codebook_size() {
        return Err(PipelineError::Missing(format!(
            "model has {} motion tokens but the codec has {}",
            model.vocab.motion_count(),
            codec.codebook_size()
        )));
    }
    let mut examples = Vec::new();
    for item in corpus.items_in(Split::Train) {
        let tokens = codec.tokenize(&item.motion)?;
        for a in &item.annotations {
            examples.push(match task {
                Task::Generation => generation_example(&model.vocab, &a.text, &tokens),
                Task::Captioning => caption_example(&model.vocab, &tokens, &a.text),
            });
        }
    }
    let (adapter, log) = finetune_adapters(&model.base, task, &examples, cfg.finetune(task), &mut |e, nll| {
        info!("{} epoch {e} nll {nll:.4}", task.name());
    })?;
    model.set_adapter(adapter);
    if let Some(obj) = model.training.as_object_mut() {
        obj.insert(format!("finetune_{}", task.name()), serde_json::to_value(cfg.finetune(task))?);
    }
    model.save(&layout.model())?;
    write_json(&layout.log(&format!("finetune-{}", task.name())), &log)?;
    Ok(log)
}

/// Frozen codec plus language model with both adapters, ready to serve.
pub struct Runtime {
    pub codec: MotionCodec,
    pub model: LanguageModel,
    pub generation: GenerationConfig,
    pub codec_digest: String,
    pub model_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactInfo {
    pub codec_file_sha256: String,
    pub codec_hash: String,
    pub model_file_sha256: String,
    pub base_hash: String,
    pub adapters: Vec<(Task, String)>,
    pub vocab_size: usize,
    pub codebook_size: usize,
    pub version: String,
}

impl Runtime {
    /// Loads and hash-verifies both artifacts.
    pub fn load(codec_path: &Path, model_path: &Path, generation: GenerationConfig) -> Result<Self, PipelineError> {
        let (codec, cc) = load_codec(codec_path)?;
        let (model, mc) = LanguageModel::load(model_path)?;
        for task in [Task::Generation, Task::Captioning] {
            if model.adapter(task).is_none() {
                return Err(PipelineError::Missing(format!("model has no {} adapter; run finetune", task.name())));
            }
        }
        if model.vocab.motion_count() != codec.codebook_size() {
            return Err(PipelineError::Missing("model and codec disagree on the motion vocabulary".into()));
        }
        Ok(Self { codec, model, generation, codec_digest: cc.digest(), model_digest: mc.digest() })
    }

    pub fn from_layout(cfg: &Config, layout: &Layout) -> Result<Self, PipelineError> {
        let codec = cfg.service.codec_path.clone().unwrap_or_else(|| layout.codec());
        let model = cfg.service.model_path.clone().unwrap_or_else(|| layout.model());
        Self::load(&codec, &model, cfg.generation.clone())
    }

    fn model(&self, task: Task) -> Model<'_> {
        Model::new(&self.model.base, self.model.adapter(task))
    }

    pub fn agent(&self) -> LmAgent<'_> {
        LmAgent {
            vocab: &self.model.vocab,
            generator: self.model(Task::Generation),
            captioner: self.model(Task::Captioning),
            generation: &self.generation,
        }
    }

    pub fn info(&self) -> ArtifactInfo {
        ArtifactInfo {
            codec_file_sha256: self.codec_digest.clone(),
            codec_hash: self.codec.artifact_hash(),
            model_file_sha256: self.model_digest.clone(),
            base_hash: self.model.base.base_hash(),
            adapters: self.model.adapters.iter().map(|a| (a.task, a.hash())).collect(),
            vocab_size: self.model.vocab.size(),
            codebook_size: self.codec.codebook_size(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn generate_motion(&self, text: &str, seed: u64) -> Result<MotionSequence, PipelineError> {
        let cfg = GenerationConfig { seed, ..self.generation.clone() };
        let out = generate_motion_tokens(self.model(Task::Generation), &self.model.vocab, text, &[], &cfg)?;
        Ok(self.codec.detokenize(&out.tokens)?)
    }

    pub fn caption_motion(&self, motion: &MotionSequence, seed: u64) -> Result<String, PipelineError> {
        let cfg = GenerationConfig { seed, ..self.generation.clone() };
        let tokens = self.codec.tokenize(motion)?;
        Ok(generate_caption(self.model(Task::Captioning), &self.model.vocab, &tokens, &cfg)?.text)
    }
}

impl MotionGenerator for &Runtime {
    fn generate(&mut self, caption: &str, seed: u64) -> Result<MotionSequence, String> {
        self.generate_motion(caption, seed).map_err(|e| e.to_string())
    }
}

impl Captioner for &Runtime {
    fn caption(&mut self, motion: &MotionSequence, seed: u64) -> Result<String, String> {
        self.caption_motion(motion, seed).map_err(|e| e.to_string())
    }
}

/// Ground-truth motions returned in item order: the reference point of the report.
pub struct GroundTruth {
    items: Vec<MotionSequence>,
    next: usize,
}

impl MotionGenerator for GroundTruth {
    fn generate(&mut self, _caption: &str, _seed: u64) -> Result<MotionSequence, String> {
        let m = self.items[self.next % self.items.len()].clone();
        self.next += 1;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionEval {
    pub model: CaptionReport,
    pub shuffled_baseline: CaptionReport,
    pub samples: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub generator: String,
    pub split: Split,
    pub generation: GenerationReport,
    pub captioning: Option<CaptionEval>,
    /// Fraction of generated motions whose archetype matches their caption.
    pub archetype_agreement: Option<f64>,
}

pub fn eval_items(corpus: &PairedCorpus, split: Split) -> Vec<EvalItem> {
    corpus
        .items_in(split)
        .map(|i| EvalItem {
            motion: i.motion.clone(),
            caption: i.annotations[0].text.clone(),
            references: i.annotations.iter().map(|a| a.text.clone()).collect(),
        })
        .collect()
}

pub fn extractor(cfg: &Config, corpus: &PairedCorpus) -> FeatureExtractor {
    FeatureExtractor::fit(
        cfg.seed,
        cfg.eval.feature_dim,
        corpus.items_in(Split::Train).flat_map(|i| i.annotations.iter().map(move |a| (&i.motion, a.text.as_str()))),
    )
}

/// Evaluates the trained runtime, or the ground truth itself when `ground_truth`.
pub fn evaluate(cfg: &Config, layout: &Layout, ground_truth: bool) -> Result<EvalReport, PipelineError> {
    let corpus = load_corpus(&layout.corpus())?;
    let items = eval_items(&corpus, cfg.eval.split);
    let ex = extractor(cfg, &corpus);
    let report = if ground_truth {
        let mut gt = GroundTruth { items: items.iter().map(|i| i.motion.clone()).collect(), next: 0 };
        let generation = evaluate_generation(&mut gt, &items, &ex, cfg.eval.repeats, cfg.seed)?;
        EvalReport { generator: "ground-truth".into(), split: cfg.eval.split, generation, captioning: None, archetype_agreement: None }
    } else {
        let mut rt = Runtime::from_layout(cfg, layout)?;
        rt.generation = cfg.eval.sampling.clone();
        let generation = evaluate_generation(&mut &rt, &items, &ex, cfg.eval.repeats, cfg.seed)?;
        rt.generation = cfg.generation.clone();
        let (model, cands) = evaluate_captioning(&mut &rt, &items, cfg.seed)?;
        let refs: Vec<Vec<String>> = items.iter().map(|i| i.references.clone()).collect();
        let shuffled_baseline = caption_report(&shuffled_pairs(&refs, cfg.seed), &refs)?;
        let samples = items.iter().zip(&cands).take(8).map(|(i, c)| (i.caption.clone(), c.clone())).collect();
        let agreement = archetype_agreement(&rt, &corpus, cfg.eval.split, cfg.seed)?;
        EvalReport {
            generator: "motion-lm".into(),
            split: cfg.eval.split,
            generation,
            captioning: Some(CaptionEval { model, shuffled_baseline, samples }),
            archetype_agreement: Some(agreement),
        }
    };
    write_json(&layout.eval_report(), &report)?;
    Ok(report)
}

/// Generates from each item's first caption and checks the motion classifier
/// recovers the captioned archetype.
pub fn archetype_agreement(rt: &Runtime, corpus: &PairedCorpus, split: Split, seed: u64) -> Result<f64, PipelineError> {
    let mut hits = 0usize;
    let mut n = 0usize;
    for (i, item) in corpus.items_in(split).enumerate() {
        let text = &item.annotations[0].text;
        let m = rt.generate_motion(text, seed.wrapping_add(i as u64))?;
        if classify(&m).is_some() && classify(&m) == Archetype::from_caption(text) {
            hits += 1;
        }
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { hits as f64 / n as f64 })
}

/// Runs `lines` as consecutive turns of a fresh session with a fixed clock.
pub fn chat_script(
    rt: &Runtime,
    planner: &mut dyn PlannerBackend,
    session_id: &str,
    lines: &[String],
    seed: u64,
) -> Result<Session, PipelineError> {
    let mut session = Session::new(session_id, 0);
    let mut agent = rt.agent();
    for (i, line) in lines.iter().enumerate() {
        run_turn(&mut session, line, planner, &mut agent, &rt.codec, seed, i as u64 + 1)?;
    }
    Ok(session)
}
