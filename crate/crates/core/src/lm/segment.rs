use std::fmt;
use std::sync::Arc;

use crate::tokenizer::TokenizerModel;

/// Splits text into the units the n-gram model counts.
#[derive(Clone)]
pub enum SubwordSegmenter {
    /// Token strings of a trained subword model (byte tokens included).
    Tokenizer(Arc<TokenizerModel>),
    /// Lowercased whitespace-separated words.
    WhitespaceLowercase,
}

impl fmt::Debug for SubwordSegmenter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl SubwordSegmenter {
    pub fn name(&self) -> &'static str {
        match self {
            SubwordSegmenter::Tokenizer(_) => "tokenizer",
            SubwordSegmenter::WhitespaceLowercase => "whitespace-lowercase",
        }
    }

    /// Units of one line. Non-empty input never yields an empty result.
    pub fn segment(&self, text: &str) -> Vec<String> {
        if text.is_empty() {
            return Vec::new();
        }
        match self {
            SubwordSegmenter::Tokenizer(m) => m
                .encode(text)
                .into_iter()
                .filter_map(|id| m.token(id).map(str::to_string))
                .collect(),
            SubwordSegmenter::WhitespaceLowercase => {
                let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
                if words.is_empty() {
                    vec![" ".to_string()]
                } else {
                    words
                }
            }
        }
    }

    /// Units every model built with this segmenter knows about up front.
    pub fn seed_vocabulary(&self) -> Vec<String> {
        match self {
            SubwordSegmenter::Tokenizer(m) => m
                .vocab()
                .iter()
                .enumerate()
                .filter(|(i, t)| !m.is_special(*i as u32) && !t.is_empty())
                .map(|(_, t)| t.clone())
                .collect(),
            SubwordSegmenter::WhitespaceLowercase => Vec::new(),
        }
    }
}

/// Non-empty lines of a text; each is scored as its own sequence.
pub fn lines(text: &str) -> impl Iterator<Item = &str> {
    text.split('\n').filter(|l| !l.trim().is_empty())
}
