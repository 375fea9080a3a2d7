use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::MotionError;

/// Lowercases, replaces every non-alphanumeric character with a space and
/// splits on whitespace.
pub fn normalize_text(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(String::from).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextAnnotation {
    pub text: String,
    pub tokens: Vec<String>,
}

impl TextAnnotation {
    pub fn new(text: &str) -> Result<Self, MotionError> {
        let tokens = normalize_text(text);
        if tokens.is_empty() {
            return Err(MotionError::EmptyAnnotation);
        }
        Ok(Self { text: text.into(), tokens })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("A person walks, QUICKLY!"), ["a", "person", "walks", "quickly"]);
        assert!(TextAnnotation::new(" ?! ").is_err());
    }
}
