#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;

use motion_agent::config::{Config, Layout};
use motion_agent::pipeline;
use motion_agent_core::lm::Task;

/// Small enough to train every stage in a few seconds.
pub const TINY: &str = r#"{
    "seed": 11,
    "corpus": { "samples_per_archetype": 10 },
    "codec": { "width": 16, "latent_dim": 16, "codebook_size": 16 },
    "train_codec": { "max_epochs": 2 },
    "lm": { "hidden": 16, "blocks": 1, "heads": 2, "ffn": 32 },
    "pretrain": { "epochs": 1 },
    "finetune_generation": { "epochs": 1 },
    "finetune_captioning": { "epochs": 1 },
    "eval": { "repeats": 3 }
}"#;

pub fn tiny_config() -> Config {
    let mut c = Config::from_json(TINY).unwrap();
    c.propagate_seed();
    c
}

pub fn build_artifacts(cfg: &Config, dir: &Path) -> Layout {
    let layout = Layout::new(dir);
    pipeline::synth(cfg, &layout).unwrap();
    pipeline::train_codec(cfg, &layout).unwrap();
    pipeline::train_base(cfg, &layout).unwrap();
    pipeline::finetune(cfg, &layout, Task::Generation).unwrap();
    pipeline::finetune(cfg, &layout, Task::Captioning).unwrap();
    layout
}

/// Trained tiny artifacts shared by every test in one binary.
pub fn shared() -> &'static (tempfile::TempDir, Config, Layout) {
    static CELL: OnceLock<(tempfile::TempDir, Config, Layout)> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        let layout = build_artifacts(&cfg, dir.path());
        (dir, cfg, layout)
    })
}
