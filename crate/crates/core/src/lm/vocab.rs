use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::motion::normalize_text;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Word-level base vocabulary followed by `K` motion tokens and the two
/// motion brackets at ids `[B, B+K+2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    base_tokens: Vec<String>,
    motion_count: usize,
    index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    base_tokens: Vec<String>,
    motion_count: usize,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        Self::from_tokens(r.base_tokens, r.motion_count)
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        Self { base_tokens: v.base_tokens, motion_count: v.motion_count }
    }
}

impl Vocabulary {
    /// Specials, then every distinct normalized word of `texts` in sorted order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut words: Vec<String> = texts.into_iter().flat_map(normalize_text).collect();
        words.sort();
        words.dedup();
        let mut base: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        base.extend(words);
        Self::from_tokens(base, 0)
    }

    pub fn from_tokens(base_tokens: Vec<String>, motion_count: usize) -> Self {
        let index = base_tokens.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { base_tokens, motion_count, index }
    }

    pub fn with_motion_tokens(&self, k: usize) -> Self {
        Self { motion_count: k, ..self.clone() }
    }

    pub fn base_tokens(&self) -> &[String] {
        &self.base_tokens
    }

    /// `B`.
    pub fn base_size(&self) -> usize {
        self.base_tokens.len()
    }

    /// `K`.
    pub fn motion_count(&self) -> usize {
        self.motion_count
    }

    /// `B + K + 2` once extended, `B` before.
    pub fn size(&self) -> usize {
        if self.motion_count == 0 {
            self.base_size()
        } else {
            self.base_size() + self.motion_count + 2
        }
    }

    pub fn motion_id(&self, code: usize) -> usize {
        self.base_size() + code
    }

    pub fn motion_open(&self) -> usize {
        self.base_size() + self.motion_count
    }

    pub fn motion_close(&self) -> usize {
        self.base_size() + self.motion_count + 1
    }

    pub fn motion_index(&self, id: usize) -> Option<usize> {
        (id >= self.base_size() && id < self.motion_open()).then(|| id - self.base_size())
    }

    pub fn id_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn token(&self, id: usize) -> String {
        if id < self.base_size() {
            self.base_tokens[id].clone()
        } else if let Some(k) = self.motion_index(id) {
            format!("<Motion_{k}>")
        } else if id == self.motion_open() {
            "<Motion>".into()
        } else if id == self.motion_close() {
            "</Motion>".into()
        } else {
            "<unk>".into()
        }
    }

    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        normalize_text(text).iter().map(|w| self.id_of(w).unwrap_or(UNK)).collect()
    }

    /// Words of the base ids in order; specials and motion ids are dropped.
    pub fn decode_text(&self, ids: &[usize]) -> String {
        let words: Vec<&str> = ids
            .iter()
            .filter(|&&id| id >= SPECIALS.len() && id < self.base_size())
            .map(|&id| self.base_tokens[id].as_str())
            .collect();
        words.join(" ")
    }

    pub fn is_special(id: usize) -> bool {
        id < SPECIALS.len()
    }
}
