use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use serde::{Deserialize, Serialize};

use super::CodecError;

pub const MOTION_OPEN: &str = "<Motion>";
pub const MOTION_CLOSE: &str = "</Motion>";

/// Codebook indices for one motion, optionally with the number of real
/// frames before padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionTokenSeq {
    pub ids: Vec<usize>,
    pub bracketed: bool,
    #[serde(default)]
    pub source_frames: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenParseError {
    #[error("unrecognised token `{0}`")]
    Unknown(String),
    #[error("unbalanced motion brackets")]
    Unbalanced,
    #[error("no motion tokens")]
    Empty,
}

impl MotionTokenSeq {
    pub fn new(ids: Vec<usize>) -> Self {
        Self { ids, bracketed: true, source_frames: None }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self, codebook_size: usize) -> Result<(), CodecError> {
        if self.ids.is_empty() {
            return Err(CodecError::EmptyTokens);
        }
        match self.ids.iter().find(|&&id| id >= codebook_size) {
            Some(&id) => Err(CodecError::Vocabulary { id, size: codebook_size }),
            None => Ok(()),
        }
    }

    /// `<Motion> <Motion_i> ... </Motion>` with single spaces; no brackets
    /// when `bracketed` is false.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if self.bracketed {
            s.push_str(MOTION_OPEN);
        }
        for id in &self.ids {
            if !s.is_empty() {
                s.push(' ');
            }
            let _ = write!(s, "<Motion_{id}>");
        }
        if self.bracketed {
            s.push(' ');
            s.push_str(MOTION_CLOSE);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, TokenParseError> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let (bracketed, inner) = match (words.first(), words.last()) {
            (Some(&MOTION_OPEN), Some(&MOTION_CLOSE)) if words.len() >= 2 => (true, &words[1..words.len() - 1]),
            _ => (false, &words[..]),
        };
        let mut ids = Vec::with_capacity(inner.len());
        for w in inner {
            if *w == MOTION_OPEN || *w == MOTION_CLOSE {
                return Err(TokenParseError::Unbalanced);
            }
            ids.push(parse_motion_token(w).ok_or_else(|| TokenParseError::Unknown(format!("{w}")))?);
        }
        if ids.is_empty() {
            return Err(TokenParseError::Empty);
        }
        Ok(Self { ids, bracketed, source_frames: None })
    }
}

pub fn parse_motion_token(word: &str) -> Option<usize> {
    let digits = word.strip_prefix("<Motion_")?.strip_suffix('>')?;
    if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    digits.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn text_round_trip() {
        let t = MotionTokenSeq::new(vec![3, 0, 17]);
        assert_eq!(t.to_text(), "<Motion> <Motion_3> <Motion_0> <Motion_17> </Motion>");
        assert_eq!(MotionTokenSeq::parse(&t.to_text()).unwrap(), t);
        let bare = MotionTokenSeq { bracketed: false, ..t.clone() };
        assert_eq!(bare.to_text(), "<Motion_3> <Motion_0> <Motion_17>");
        assert_eq!(MotionTokenSeq::parse(&bare.to_text()).unwrap(), bare);
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(MotionTokenSeq::parse("<Motion> </Motion>"), Err(TokenParseError::Empty));
        assert!(matches!(MotionTokenSeq::parse("<Motion_x>"), Err(TokenParseError::Unknown(_))));
        assert!(matches!(MotionTokenSeq::parse("<Motion_01>"), Err(TokenParseError::Unknown(_))));
        assert_eq!(MotionTokenSeq::parse("<Motion> <Motion_1>"), Err(TokenParseError::Unbalanced));
        assert_eq!(MotionTokenSeq::new(vec![4]).validate(4), Err(CodecError::Vocabulary { id: 4, size: 4 }));
    }
}
