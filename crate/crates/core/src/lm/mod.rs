//! Interpolated Kneser-Ney n-gram models over subword units.

mod counts;
mod model;
mod segment;

pub use counts::NgramCounts;
pub use model::{
    count_corpus, discount, train_kn, Entry, KnModel, PerplexityMode, PerplexityScore, MAX_ORDER,
};
pub use segment::{lines, SubwordSegmenter};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("order {0} is outside 1..=6")]
    Order(usize),
    #[error("text is empty after segmentation")]
    EmptyText,
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model was trained with a tokenizer; pass the same tokenizer to load it")]
    MissingTokenizer,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LmError {
    fn parse(line: usize, message: &str) -> Self {
        LmError::Parse { line, message: message.to_string() }
    }
}

#[cfg(test)]
mod tests;
