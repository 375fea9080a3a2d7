//! Corpus directories: one MOTA file per item plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use motion_agent_core::corpus::{CorpusConfig, CorpusItem, MotionParams, PairedCorpus, Split};
use motion_agent_core::TextAnnotation;
use serde::{Deserialize, Serialize};

use crate::mota::{self, FormatError};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    pub file: String,
    pub split: Split,
    pub captions: Vec<String>,
    pub params: MotionParams,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: CorpusConfig,
    pub items: Vec<ManifestItem>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusIoError {
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{0}: checksum does not match the manifest")]
    Checksum(PathBuf),
    #[error("split assignment does not match the stored seed")]
    Splits,
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("annotation: {0}")]
    Annotation(#[from] motion_agent_core::MotionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn save_corpus(corpus: &PairedCorpus, dir: &Path) -> Result<Manifest, CorpusIoError> {
    fs::create_dir_all(dir.join("motions"))?;
    let mut items = Vec::new();
    for (item, split) in corpus.items.iter().zip(&corpus.split) {
        let file = format!("motions/{}.mota", item.id);
        let bytes = mota::encode(&item.motion);
        fs::write(dir.join(&file), &bytes)?;
        items.push(ManifestItem {
            id: item.id.clone(),
            file,
            split: *split,
            captions: item.annotations.iter().map(|a| a.text.clone()).collect(),
            params: item.params,
            sha256: motion_agent_core::hash::to_hex(&motion_agent_core::hash::sha256(&bytes)),
        });
    }
    let manifest = Manifest { seed: corpus.seed, config: corpus.config.clone(), items };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_corpus(dir: &Path) -> Result<PairedCorpus, CorpusIoError> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    let mut items = Vec::new();
    let mut split = Vec::new();
    for m in &manifest.items {
        let path = dir.join(&m.file);
        let bytes = fs::read(&path)?;
        if motion_agent_core::hash::to_hex(&motion_agent_core::hash::sha256(&bytes)) != m.sha256 {
            return Err(CorpusIoError::Checksum(path));
        }
        let motion = mota::decode(&bytes).map_err(|source| CorpusIoError::Format { path, source })?;
        let annotations = m.captions.iter().map(|c| TextAnnotation::new(c)).collect::<Result<Vec<_>, _>>()?;
        items.push(CorpusItem { id: m.id.clone(), motion, annotations, params: m.params });
        split.push(m.split);
    }
    let c = &manifest.config;
    if PairedCorpus::assign_splits(items.len(), manifest.seed, c.train_fraction, c.val_fraction) != split {
        return Err(CorpusIoError::Splits);
    }
    Ok(PairedCorpus { items, split, seed: manifest.seed, config: manifest.config })
}
